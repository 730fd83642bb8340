#pragma once

#include <string>
#include <vector>

#include "xsynth/benchmark.hpp"

namespace xsynth {

// Synthetic stand-in for expert routing labels: scenario templates produce
// (query, DTS, target filter) triples from generated behavior.

enum class SecurityRole { Owner, LapsedOwner, NonOwner };

inline FilterKind security_label(SecurityRole r) {
  switch (r) {
    case SecurityRole::Owner: return FilterKind::Proportional;
    case SecurityRole::LapsedOwner: return FilterKind::Differential;
    case SecurityRole::NonOwner: return FilterKind::Inverse;
  }
  return FilterKind::Proportional;
}

inline std::string_view security_role_name(SecurityRole r) {
  switch (r) {
    case SecurityRole::Owner: return "owner";
    case SecurityRole::LapsedOwner: return "lapsed-owner";
    case SecurityRole::NonOwner: return "non-owner";
  }
  return "?";
}

/// Engineering domains; eight labels so models share the default input width.
inline DomainRules engineering_rules() {
  return DomainRules({{"SecCon", "*", "security"},
                      {"*", "cve|vulnerab|security", "security"},
                      {"GitHub", "*", "code"},
                      {"Jira", "*", "tickets"},
                      {"Confluence", "*", "docs"},
                      {"Slack|Gmail|Teams", "*", "messaging"},
                      {"Jenkins", "*", "ci"},
                      {"Grafana", "*", "observability"},
                      {"*", "*", "internal"}});
}

inline const std::vector<std::string>& security_queries() {
  static const std::vector<std::string> q{
      "Is the team on top of the security vulnerabilities flagged this sprint?",
      "Are the security vulnerabilities flagged this sprint being handled?",
      "How is this sprint's security vulnerability backlog looking?",
      "Which flagged security vulnerabilities from this sprint need a look?"};
  return q;
}

struct SecurityCohortParams {
  Instant as_of = parse_utc("2026-04-01T00:00:00Z");
  std::size_t days = 28;
  std::size_t events_per_day = 24;
  std::size_t recent_days = 5;  // the short window
};

/// Three participants (owner, lapsed owner, non-owner) over the lookback.
inline EventLog security_cohort(std::uint64_t seed, const SecurityCohortParams& p = {}) {
  detail::GenRng rng(seed);
  const double owner_share = 0.35 + 0.2 * rng.unit();
  const double lapsed_share = 0.35 + 0.2 * rng.unit();
  const double lapsed_recent = 0.04 * rng.unit();
  const double outsider_share = 0.02 + 0.03 * rng.unit();
  struct Member {
    std::string id;
    SecurityRole role;
  };
  const std::vector<Member> members{{"dev-owner", SecurityRole::Owner},
                                    {"dev-lapsed", SecurityRole::LapsedOwner},
                                    {"dev-outsider", SecurityRole::NonOwner}};
  const std::vector<std::pair<std::string, std::string>> other{
      {"GitHub", "PR #"}, {"Jira", "ENG-"}, {"Confluence", "Design note "}, {"Slack", "#eng-"}, {"Jenkins", "Build "}};
  constexpr std::int64_t H = 3600;
  const Instant day0 = day_floor(p.as_of) - days(static_cast<std::int64_t>(p.days));

  std::vector<InteractionEvent> events;
  for (std::size_t d = 0; d < p.days; ++d) {
    const bool recent = d + p.recent_days >= p.days;
    for (const auto& m : members) {
      double share = 0.0;
      switch (m.role) {
        case SecurityRole::Owner: share = owner_share; break;
        case SecurityRole::LapsedOwner: share = recent ? lapsed_recent : lapsed_share; break;
        case SecurityRole::NonOwner: share = outsider_share; break;
      }
      const bool authors_security = m.role != SecurityRole::NonOwner && (m.role == SecurityRole::Owner || !recent);
      for (std::size_t n = 0; n < p.events_per_day; ++n) {
        InteractionEvent e;
        e.participant_id = m.id;
        e.ts = day0 + days(static_cast<std::int64_t>(d)) + Seconds{rng.range(9 * H, 17 * H)};
        if (rng.chance(share)) {
          e.app = "SecCon";
          e.screen_title = "CVE-2026-" + std::to_string(1000 + rng.below(12)) + " triage";
          e.screen_text = "Vulnerability triage: severity high, fix pending.";
          e.action = authors_security && rng.chance(0.4) ? "edit" : "view";
          e.dwell = static_cast<double>(rng.range(120, 600));
        } else {
          const auto& [app, prefix] = rng.pick(other);
          e.app = app;
          e.screen_title = prefix + std::to_string(rng.below(30));
          e.screen_text = "Routine engineering work.";
          e.action = rng.chance(0.3) ? "edit" : "view";
          e.dwell = static_cast<double>(rng.range(30, 400));
        }
        events.push_back(std::move(e));
      }
    }
  }
  return EventLog(std::move(events));
}

inline SecurityRole security_role_of(std::string_view participant) {
  if (participant == "dev-owner") return SecurityRole::Owner;
  if (participant == "dev-lapsed") return SecurityRole::LapsedOwner;
  return SecurityRole::NonOwner;
}

inline std::vector<TrainingExample> security_sprint_examples(std::uint64_t seed, std::size_t cohorts,
                                                             const SecurityCohortParams& p = {}) {
  const auto rules = engineering_rules();
  const DtsConfig cfg;
  std::vector<TrainingExample> out;
  for (std::size_t c = 0; c < cohorts; ++c) {
    const auto log = security_cohort(seed + 7919 * (c + 1), p);
    const Catalog catalog(log, rules);
    for (const auto& pid : log.participants()) {
      const auto features = assemble_dts(log, catalog, pid, p.as_of, cfg).features();
      for (const auto& q : security_queries()) out.push_back({q, features, security_label(security_role_of(pid))});
    }
  }
  return out;
}

inline const std::vector<std::string>& lead_query_templates() {
  static const std::vector<std::string> q{
      std::string(kDefaultBenchmarkQuery),
      "{subject}: which new business opportunities should be filed?",
      "{subject}: any new leads worth filing from recent account work?"};
  return q;
}

/// Sellers working their own accounts: their attention is the signal.
inline std::vector<TrainingExample> lead_detection_examples(std::uint64_t seed, std::size_t planted = 12) {
  GeneratorConfig g;
  g.seed = seed;
  g.days = 12;
  g.planted = planted;
  auto corpus = generate_corpus(g);
  ExtractParams ep;
  ep.negatives.seed = seed;
  const auto instances = extract_instances(corpus.log, default_filing_predicate(), ep);
  const auto rules = DomainRules::defaults();
  std::vector<TrainingExample> out;
  for (const auto& inst : instances) {
    const EventLog log(inst.events);
    if (!log.has_participant(inst.participant_id)) continue;
    const Catalog catalog(log, rules);
    const auto features = assemble_dts(log, catalog, inst.participant_id, inst.as_of).features();
    for (const auto& t : lead_query_templates())
      out.push_back({benchmark_query(t, corpus.roster, inst.participant_id), features, FilterKind::Proportional});
  }
  return out;
}

struct HarnessParams {
  std::uint64_t seed = 7;
  std::size_t security_cohorts = 24;
  std::size_t lead_planted = 12;
  TrainParams train{7, 0.05, 60, 16};
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 64;
};

inline std::vector<TrainingExample> harness_dataset(const HarnessParams& p = {}) {
  auto out = security_sprint_examples(p.seed, p.security_cohorts);
  auto leads = lead_detection_examples(p.seed + 1000, p.lead_planted);
  out.insert(out.end(), leads.begin(), leads.end());
  return out;
}

/// Trains the default selector from the harness dataset.
inline TrainResult train_harness_model(const HarnessParams& p = {}, const Embedder* embedder = nullptr) {
  const HashingEmbedder fallback;
  const Embedder& emb = embedder ? *embedder : fallback;
  const auto data = harness_dataset(p);
  const SelectorDims dims{emb.dim(), engineering_rules().size(), p.hidden1, p.hidden2};
  return train(SelectorModel::initialized(dims, p.seed), std::span<const TrainingExample>(data), p.train, emb);
}

inline std::vector<TrainingExample> dataset_from_jsonl(std::istream& in) {
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("dataset", "line " + std::to_string(n) + ": " + e.what());
    }
    out.push_back({j.at("query").get<std::string>(), j.at("dts_features").get<std::vector<double>>(),
                   filter_from_name(j.at("target").get<std::string>())});
  }
  return out;
}

inline std::string dataset_to_jsonl(const std::vector<TrainingExample>& data) {
  std::string out;
  for (const auto& ex : data)
    out += Json{{"query", ex.query}, {"dts_features", ex.dts_features}, {"target", std::string(filter_name(ex.target))}}
               .dump() +
           "\n";
  return out;
}

}  // namespace xsynth
