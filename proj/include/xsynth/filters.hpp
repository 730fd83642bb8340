#pragma once

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xsynth/dts.hpp"
#include "xsynth/embedding.hpp"

namespace xsynth {

enum class FilterKind : int {
  Proportional = 1,
  Inverse = 2,
  Differential = 3,
  Recurrent = 4,
  Comparative = 5,
  Sequential = 6,
  Collective = 7,
};

inline constexpr std::size_t kFilterCount = 7;

inline constexpr std::array<FilterKind, kFilterCount> kAllFilters{
    FilterKind::Proportional, FilterKind::Inverse,    FilterKind::Differential, FilterKind::Recurrent,
    FilterKind::Comparative,  FilterKind::Sequential, FilterKind::Collective};

/// 1-based ordinal.
inline constexpr int ordinal(FilterKind k) noexcept { return static_cast<int>(k); }
inline constexpr std::size_t filter_index(FilterKind k) noexcept { return static_cast<std::size_t>(ordinal(k) - 1); }
inline constexpr FilterKind filter_at(std::size_t index) noexcept { return kAllFilters[index]; }

inline std::string_view filter_name(FilterKind k) noexcept {
  switch (k) {
    case FilterKind::Proportional: return "Proportional";
    case FilterKind::Inverse: return "Inverse";
    case FilterKind::Differential: return "Differential";
    case FilterKind::Recurrent: return "Recurrent";
    case FilterKind::Comparative: return "Comparative";
    case FilterKind::Sequential: return "Sequential";
    case FilterKind::Collective: return "Collective";
  }
  return "?";
}

inline FilterKind filter_from_name(std::string_view name) {
  const auto lower = to_lower(name);
  for (auto k : kAllFilters)
    if (to_lower(filter_name(k)) == lower) return k;
  throw ParseError("filter", "unknown filter '" + std::string(name) + "'");
}

struct FilterParams {
  double ownership_threshold = 0.3;
  double low_attention_threshold = 0.0;
  double alternation_gap_s = 300.0;
  double sim_threshold = 0.6;
  double sigma_floor = 0.01;
  double lambda_out = 0.5;
};

/// Scores in [0,1] (max-normalized) plus the unnormalized signal each score
/// came from, which the evidence annotations quote.
struct ImportanceMap {
  std::map<std::string, double> scores;
  std::map<std::string, double> raw;

  double score(const std::string& id) const {
    auto it = scores.find(id);
    return it == scores.end() ? 0.0 : it->second;
  }
  double raw_value(const std::string& id) const {
    auto it = raw.find(id);
    return it == raw.end() ? 0.0 : it->second;
  }
  double max_score() const {
    double m = 0.0;
    for (const auto& [_, s] : scores) m = std::max(m, s);
    return m;
  }
};

namespace detail {

inline std::map<std::string, double> zero_map(std::span<const Artifact> artifacts) {
  std::map<std::string, double> m;
  for (const auto& a : artifacts) m.emplace(a.artifact_id, 0.0);
  return m;
}

inline ImportanceMap normalize_by_max(std::map<std::string, double> raw) {
  ImportanceMap out;
  double mx = 0.0;
  for (const auto& [_, v] : raw) mx = std::max(mx, v);
  for (const auto& [id, v] : raw) out.scores.emplace(id, mx > 0.0 ? v / mx : 0.0);
  out.raw = std::move(raw);
  return out;
}

}  // namespace detail

/// Score ∝ total dwell on the artifact.
inline ImportanceMap proportional(std::span<const Observation> events, std::span<const Artifact> artifacts) {
  auto raw = detail::zero_map(artifacts);
  for (const auto& o : events)
    if (auto it = raw.find(o.artifact_id); it != raw.end()) it->second += o.dwell;
  return detail::normalize_by_max(std::move(raw));
}

/// Each artifact's share of the cohort's dwell within the artifact's domain.
inline std::map<std::string, double> cohort_attention_share(std::span<const Observation> cohort,
                                                            std::span<const Artifact> artifacts, std::size_t d) {
  std::map<std::string, double> dwell = detail::zero_map(artifacts);
  std::vector<double> domain_total(d, 0.0);
  for (const auto& o : cohort) {
    domain_total.at(o.domain) += o.dwell;
    if (auto it = dwell.find(o.artifact_id); it != dwell.end()) it->second += o.dwell;
  }
  for (const auto& a : artifacts) {
    auto& v = dwell[a.artifact_id];
    v = domain_total[a.domain_index] > 0.0 ? v / domain_total[a.domain_index] : 0.0;
  }
  return dwell;
}

/// Artifacts in domains the participant owns that the participant left
/// unattended, weighted by ownership and by how much the cohort attended them.
inline ImportanceMap inverse(std::span<const Observation> events, std::span<const Artifact> artifacts,
                             const DigitalTwinSignature& dts, const std::map<std::string, double>& cohort_share,
                             const FilterParams& params = {}) {
  auto own_dwell = detail::zero_map(artifacts);
  for (const auto& o : events)
    if (auto it = own_dwell.find(o.artifact_id); it != own_dwell.end()) it->second += o.dwell;
  auto raw = detail::zero_map(artifacts);
  for (const auto& a : artifacts) {
    const double resp = dts.v_resp.at(a.domain_index);
    if (resp < params.ownership_threshold) continue;
    if (own_dwell[a.artifact_id] > params.low_attention_threshold) continue;
    auto it = cohort_share.find(a.artifact_id);
    raw[a.artifact_id] = resp * (it == cohort_share.end() ? 0.0 : it->second);
  }
  return detail::normalize_by_max(std::move(raw));
}

/// Per-domain z-score of the current dwell share against the participant's
/// baseline, distributed over the domain's artifacts by dwell share (or
/// uniformly when the domain dropped to zero dwell).
inline ImportanceMap differential(std::span<const Observation> events, std::span<const Artifact> artifacts,
                                  const BaselineStats& baseline, const FilterParams& params = {}) {
  const std::size_t d = baseline.mean.size();
  std::vector<double> domain_dwell(d, 0.0);
  std::map<std::string, double> artifact_dwell = detail::zero_map(artifacts);
  double total = 0.0;
  for (const auto& o : events) {
    domain_dwell.at(o.domain) += o.dwell;
    total += o.dwell;
    if (auto it = artifact_dwell.find(o.artifact_id); it != artifact_dwell.end()) it->second += o.dwell;
  }
  std::vector<double> z(d, 0.0), members(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double current = total > 0.0 ? domain_dwell[i] / total : 0.0;
    z[i] = std::abs(current - baseline.mean[i]) / std::max(baseline.stddev[i], params.sigma_floor);
  }
  for (const auto& a : artifacts) members[a.domain_index] += 1.0;
  auto raw = detail::zero_map(artifacts);
  for (const auto& a : artifacts) {
    const auto dom = a.domain_index;
    const double within = domain_dwell[dom] > 0.0 ? artifact_dwell[a.artifact_id] / domain_dwell[dom]
                                                  : 1.0 / members[dom];
    raw[a.artifact_id] = z[dom] * within;
  }
  return detail::normalize_by_max(std::move(raw));
}

/// Score ∝ visits − 1, where a visit is a maximal run of consecutive events on
/// the artifact inside one session. Dwell is ignored.
inline ImportanceMap recurrent(std::span<const Observation> events, const std::vector<Session>& sessions,
                               std::span<const Artifact> artifacts) {
  std::map<std::string, double> visits;
  for (const auto& s : sessions)
    for (std::size_t i = s.begin; i < s.end; ++i)
      if (i == s.begin || events[i - 1].artifact_id != events[i].artifact_id) visits[events[i].artifact_id] += 1.0;
  auto raw = detail::zero_map(artifacts);
  for (auto& [id, v] : raw) {
    auto it = visits.find(id);
    v = it == visits.end() ? 0.0 : std::max(it->second - 1.0, 0.0);
  }
  return detail::normalize_by_max(std::move(raw));
}

/// Alternation points: adjacent events on two different, similar artifacts
/// within the alternation gap credit both artifacts.
inline ImportanceMap comparative(std::span<const Observation> events, std::span<const Artifact> artifacts,
                                 const std::map<std::string, Embedding>& embeddings, const FilterParams& params = {}) {
  auto raw = detail::zero_map(artifacts);
  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto& a = events[i - 1];
    const auto& b = events[i];
    if (a.artifact_id == b.artifact_id) continue;
    if (static_cast<double>((b.ts - a.ts).count()) >= params.alternation_gap_s) continue;
    auto ea = embeddings.find(a.artifact_id);
    auto eb = embeddings.find(b.artifact_id);
    if (ea == embeddings.end() || eb == embeddings.end()) continue;
    if (cosine(ea->second, eb->second) < params.sim_threshold) continue;
    if (auto it = raw.find(a.artifact_id); it != raw.end()) it->second += 1.0;
    if (auto it = raw.find(b.artifact_id); it != raw.end()) it->second += 1.0;
  }
  return detail::normalize_by_max(std::move(raw));
}

/// Max surprise −ln T[x,y] over baseline domain transitions entering each artifact.
inline ImportanceMap sequential(std::span<const Observation> events, const BaselineStats& baseline,
                                std::span<const Artifact> artifacts) {
  auto raw = detail::zero_map(artifacts);
  for (std::size_t i = 1; i < events.size(); ++i) {
    const double p = baseline.transition.at(events[i - 1].domain).at(events[i].domain);
    const double surprise = -std::log(p);
    if (auto it = raw.find(events[i].artifact_id); it != raw.end()) it->second = std::max(it->second, surprise);
  }
  return detail::normalize_by_max(std::move(raw));
}

using CohortDwell = std::map<std::string, std::map<std::string, double>>;  // participant → artifact → dwell

inline CohortDwell cohort_dwell(std::span<const Observation> events, const std::vector<std::string>& cohort) {
  CohortDwell out;
  for (const auto& p : cohort) out[p];
  for (const auto& o : events)
    if (auto it = out.find(o.participant_id); it != out.end()) it->second[o.artifact_id] += o.dwell;
  return out;
}

/// Cohort mean of per-participant max-normalized dwell, plus λ_out times the
/// largest individual deviation from that mean.
inline ImportanceMap collective(const CohortDwell& per_participant, std::span<const Artifact> artifacts,
                                const FilterParams& params = {}) {
  if (per_participant.empty()) throw ValidationError("cohort", "collective filter needs a nonempty cohort");
  std::vector<std::map<std::string, double>> normalized;
  for (const auto& [_, dwell] : per_participant) {
    double mx = 0.0;
    for (const auto& [__, v] : dwell) mx = std::max(mx, v);
    std::map<std::string, double> n;
    for (const auto& a : artifacts) {
      auto it = dwell.find(a.artifact_id);
      n[a.artifact_id] = (mx > 0.0 && it != dwell.end()) ? it->second / mx : 0.0;
    }
    normalized.push_back(std::move(n));
  }
  const double size = static_cast<double>(normalized.size());
  auto raw = detail::zero_map(artifacts);
  for (auto& [id, v] : raw) {
    double mean = 0.0;
    for (const auto& n : normalized) mean += n.at(id);
    mean /= size;
    double outlier = 0.0;
    for (const auto& n : normalized) outlier = std::max(outlier, std::abs(n.at(id) - mean));
    v = mean + params.lambda_out * outlier;
  }
  return detail::normalize_by_max(std::move(raw));
}

}  // namespace xsynth
