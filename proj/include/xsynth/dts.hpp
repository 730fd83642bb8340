#pragma once

#include <array>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xsynth/event_store.hpp"

namespace xsynth {

struct DtsConfig {
  std::int64_t short_days = 5;
  std::int64_t long_days = 14;
  std::int64_t lookback_days = 28;
  std::int64_t session_gap_s = kDefaultSessionGapSeconds;
  double divergence_epsilon = 1e-3;
  /// Actions that count as authorship for the responsibility profile.
  std::set<std::string> authoring_actions{"write", "create", "edit", "send", "file_opportunity"};
};

/// Layout of the global summary vector `g`.
enum GlobalSummary : std::size_t {
  kEventCount = 0,
  kActiveDays,
  kSessionCount,
  kMeanSessionLength,
  kDomainSwitchRate,  // per hour of the short window
  kTotalDivergence,
  kGlobalSummarySize
};

struct DigitalTwinSignature {
  std::string participant_id;
  Window window;
  std::vector<double> v_dom;
  std::vector<double> v_rhythm;
  std::vector<double> v_base;
  std::vector<double> v_resp;
  std::vector<double> v_div;
  std::array<double, kGlobalSummarySize> g{};

  std::size_t domains() const noexcept { return v_dom.size(); }

  /// Flattened selector input of length 5d + 6. Count-like entries of g are
  /// log1p-compressed so they share a scale with the [0,1] components.
  std::vector<double> features() const {
    std::vector<double> f;
    f.reserve(5 * domains() + kGlobalSummarySize);
    for (const auto* part : {&v_dom, &v_rhythm, &v_base, &v_resp, &v_div}) f.insert(f.end(), part->begin(), part->end());
    for (std::size_t i = 0; i < kTotalDivergence; ++i) f.push_back(std::log1p(g[i]));
    f.push_back(g[kTotalDivergence]);
    return f;
  }

  friend bool operator==(const DigitalTwinSignature&, const DigitalTwinSignature&) = default;
};

inline std::size_t dts_feature_size(std::size_t d) { return 5 * d + kGlobalSummarySize; }

struct BaselineStats {
  std::vector<double> mean;    // per-domain mean daily dwell share
  std::vector<double> stddev;  // population std of the same samples
  std::vector<std::vector<double>> transition;  // add-one smoothed, row-stochastic
};

// ---------------------------------------------------------------------------

inline std::vector<double> compute_domain_attention(std::span<const Observation> events, std::size_t d) {
  std::vector<double> dwell(d, 0.0);
  double total = 0.0;
  for (const auto& o : events) {
    dwell.at(o.domain) += o.dwell;
    total += o.dwell;
  }
  if (total <= 0.0) return std::vector<double>(d, 1.0 / static_cast<double>(d));
  for (auto& x : dwell) x /= total;
  return dwell;
}

namespace detail {
/// (x - min) / (max - min); all zeros when the range is empty.
inline void min_max_normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, range = *hi - *lo;
  for (auto& x : v) x = range > 0.0 ? (x - mn) / range : 0.0;
}
}  // namespace detail

/// Equal blend of three per-domain sub-signals, each min-max normalized across
/// domains: mean dwell per visit, revisit rate, incoming-transition share. A
/// visit is a maximal same-domain run inside one session.
inline std::vector<double> compute_rhythm(std::span<const Observation> events, const std::vector<Session>& sessions,
                                          std::size_t d) {
  std::vector<double> rhythm(d, 0.0);
  if (events.empty()) return rhythm;
  std::vector<double> dwell(d, 0.0), visits(d, 0.0), incoming(d, 0.0);
  double transitions = 0.0;
  for (const auto& s : sessions) {
    for (std::size_t i = s.begin; i < s.end; ++i) {
      const auto dom = events[i].domain;
      dwell[dom] += events[i].dwell;
      if (i == s.begin || events[i - 1].domain != dom) visits[dom] += 1.0;
      if (i > s.begin && events[i - 1].domain != dom) {
        incoming[dom] += 1.0;
        transitions += 1.0;
      }
    }
  }
  std::vector<double> per_visit(d, 0.0), revisit(d, 0.0), in_share(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (visits[i] > 0.0) {
      per_visit[i] = dwell[i] / visits[i];
      revisit[i] = (visits[i] - 1.0) / visits[i];
    }
    if (transitions > 0.0) in_share[i] = incoming[i] / transitions;
  }
  detail::min_max_normalize(per_visit);
  detail::min_max_normalize(revisit);
  detail::min_max_normalize(in_share);
  for (std::size_t i = 0; i < d; ++i) rhythm[i] = (per_visit[i] + revisit[i] + in_share[i]) / 3.0;
  return rhythm;
}

/// Per-day dwell shares over `lookback` (zero-activity days contribute zero
/// samples) and the consecutive-pair domain transition matrix.
inline BaselineStats compute_baseline(std::span<const Observation> events, const Window& lookback, std::size_t d) {
  const std::int64_t n_days = (lookback.length_seconds() + kSecondsPerDay - 1) / kSecondsPerDay;
  std::vector<std::vector<double>> daily(static_cast<std::size_t>(n_days), std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> counts(d, std::vector<double>(d, 1.0));
  const Observation* prev = nullptr;
  for (const auto& o : events) {
    if (!lookback.contains(o.ts)) continue;
    const auto day = static_cast<std::size_t>((o.ts - lookback.start).count() / kSecondsPerDay);
    daily[day][o.domain] += o.dwell;
    if (prev) counts[prev->domain][o.domain] += 1.0;
    prev = &o;
  }
  BaselineStats b;
  b.mean.assign(d, 0.0);
  b.stddev.assign(d, 0.0);
  for (auto& day : daily) {
    double total = 0.0;
    for (double x : day) total += x;
    for (auto& x : day) x = total > 0.0 ? x / total : 0.0;
  }
  const double n = static_cast<double>(daily.size());
  if (n > 0) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (const auto& day : daily) s += day[i];
      b.mean[i] = s / n;
      double v = 0.0;
      for (const auto& day : daily) v += (day[i] - b.mean[i]) * (day[i] - b.mean[i]);
      b.stddev[i] = std::sqrt(v / n);
    }
  }
  b.transition = std::move(counts);
  for (auto& row : b.transition) {
    double s = 0.0;
    for (double x : row) s += x;
    for (auto& x : row) x /= s;
  }
  return b;
}

/// 0.5 · dwell share of the cohort + 0.5 · authorship share of the cohort, per
/// domain. When the cohort has dwell but no authoring actions in a domain the
/// authorship half falls back to the dwell share.
inline std::vector<double> compute_responsibility(const std::string& participant, std::span<const Observation> cohort,
                                                  std::size_t d, const std::set<std::string>& authoring_actions) {
  std::vector<double> mine_dwell(d, 0.0), all_dwell(d, 0.0), mine_auth(d, 0.0), all_auth(d, 0.0);
  for (const auto& o : cohort) {
    const bool mine = o.participant_id == participant;
    const bool authored = authoring_actions.count(o.action) != 0;
    all_dwell[o.domain] += o.dwell;
    if (mine) mine_dwell[o.domain] += o.dwell;
    if (authored) {
      all_auth[o.domain] += 1.0;
      if (mine) mine_auth[o.domain] += 1.0;
    }
  }
  std::vector<double> resp(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double dwell_share = all_dwell[i] > 0.0 ? mine_dwell[i] / all_dwell[i] : 0.0;
    double auth_share = 0.0;
    if (all_auth[i] > 0.0)
      auth_share = mine_auth[i] / all_auth[i];
    else if (all_dwell[i] > 0.0)
      auth_share = dwell_share;
    resp[i] = 0.5 * dwell_share + 0.5 * auth_share;
  }
  return resp;
}

struct Divergence {
  std::vector<double> per_domain;  // p_i ln(p_i / r_i)
  double total = 0.0;              // KL(p || r)
};

/// Smooths a distribution by mixing with uniform at weight eps.
inline std::vector<double> smooth_with_uniform(std::vector<double> p, double eps) {
  const double u = 1.0 / static_cast<double>(p.size());
  double s = 0.0;
  for (auto& x : p) {
    x = (1.0 - eps) * x + eps * u;
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

inline Divergence divergence_of(const std::vector<double>& p_raw, const std::vector<double>& r_raw, double eps) {
  const auto p = smooth_with_uniform(p_raw, eps);
  const auto r = smooth_with_uniform(r_raw, eps);
  Divergence out;
  out.per_domain.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.per_domain[i] = p[i] * std::log(p[i] / r[i]);
    out.total += out.per_domain[i];
  }
  return out;
}

inline Divergence compute_divergence(std::span<const Observation> short_window, std::span<const Observation> long_window,
                                     std::size_t d, double eps = 1e-3) {
  return divergence_of(compute_domain_attention(short_window, d), compute_domain_attention(long_window, d), eps);
}

// ---------------------------------------------------------------------------

/// Windows used around `as_of`.
struct DtsWindows {
  Window short_window;
  Window long_window;
  Window lookback;

  DtsWindows(Instant as_of, const DtsConfig& c)
      : short_window(Window::ending_at(as_of, c.short_days)),
        long_window(Window::ending_at(as_of, c.long_days)),
        lookback(Window::ending_at(as_of, c.lookback_days)) {}
};

inline DigitalTwinSignature assemble_dts(const EventLog& log, const Catalog& catalog, const std::string& participant,
                                         Instant as_of, const DtsConfig& config = {}) {
  if (!log.has_participant(participant)) throw NotFoundError("unknown participant '" + participant + "'");
  const std::size_t d = catalog.domains().size();
  const DtsWindows w(as_of, config);

  const auto short_obs = observe(log, catalog, window_slice(log, participant, w.short_window));
  const auto long_obs = observe(log, catalog, window_slice(log, participant, w.long_window));
  const auto cohort_obs = observe(log, catalog, window_slice_all(log, w.lookback));
  const auto sessions = sessionize(short_obs, config.session_gap_s);

  DigitalTwinSignature dts;
  dts.participant_id = participant;
  dts.window = w.short_window;
  dts.v_dom = compute_domain_attention(short_obs, d);
  dts.v_rhythm = compute_rhythm(short_obs, sessions, d);
  dts.v_base = compute_domain_attention(long_obs, d);
  dts.v_resp = compute_responsibility(participant, cohort_obs, d, config.authoring_actions);
  auto div = compute_divergence(short_obs, long_obs, d, config.divergence_epsilon);
  dts.v_div = div.per_domain;

  std::set<std::int64_t> active_days;
  double switches = 0.0;
  for (std::size_t i = 0; i < short_obs.size(); ++i) {
    active_days.insert(epoch_seconds(day_floor(short_obs[i].ts)));
    if (i > 0 && short_obs[i].domain != short_obs[i - 1].domain) switches += 1.0;
  }
  dts.g[kEventCount] = static_cast<double>(short_obs.size());
  dts.g[kActiveDays] = static_cast<double>(active_days.size());
  dts.g[kSessionCount] = static_cast<double>(sessions.size());
  dts.g[kMeanSessionLength] =
      sessions.empty() ? 0.0 : static_cast<double>(short_obs.size()) / static_cast<double>(sessions.size());
  dts.g[kDomainSwitchRate] = switches / (static_cast<double>(w.short_window.length_seconds()) / 3600.0);
  dts.g[kTotalDivergence] = div.total;
  return dts;
}

inline BaselineStats baseline_for(const EventLog& log, const Catalog& catalog, const std::string& participant,
                                  Instant as_of, const DtsConfig& config = {}) {
  const auto lookback = Window::ending_at(as_of, config.lookback_days);
  const auto obs = observe(log, catalog, window_slice(log, participant, lookback));
  return compute_baseline(obs, lookback, catalog.domains().size());
}

inline Json to_json(const DigitalTwinSignature& dts, const std::vector<std::string>& domain_labels) {
  return Json{{"participant_id", dts.participant_id},
              {"window", Json{{"start", format_utc(dts.window.start)}, {"end", format_utc(dts.window.end)}}},
              {"domains", domain_labels},
              {"v_dom", dts.v_dom},
              {"v_rhythm", dts.v_rhythm},
              {"v_base", dts.v_base},
              {"v_resp", dts.v_resp},
              {"v_div", dts.v_div},
              {"g", dts.g}};
}

inline DigitalTwinSignature dts_from_json(const Json& j) {
  DigitalTwinSignature dts;
  dts.participant_id = j.at("participant_id").get<std::string>();
  dts.window = Window{parse_utc(j.at("window").at("start").get<std::string>()),
                      parse_utc(j.at("window").at("end").get<std::string>())};
  dts.v_dom = j.at("v_dom").get<std::vector<double>>();
  dts.v_rhythm = j.at("v_rhythm").get<std::vector<double>>();
  dts.v_base = j.at("v_base").get<std::vector<double>>();
  dts.v_resp = j.at("v_resp").get<std::vector<double>>();
  dts.v_div = j.at("v_div").get<std::vector<double>>();
  dts.g = j.at("g").get<std::array<double, kGlobalSummarySize>>();
  return dts;
}

}  // namespace xsynth
