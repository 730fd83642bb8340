#pragma once

#include <chrono>
#include <future>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "xsynth/retrieval.hpp"
#include "xsynth/synthesis.hpp"

namespace xsynth {

// ---------------------------------------------------------------------------
// Roster and subject scoping
// ---------------------------------------------------------------------------

struct RosterEntry {
  std::string id;
  std::string display_name;
  std::vector<std::string> aliases;
};

class Roster {
 public:
  Roster() = default;

  Roster(std::vector<RosterEntry> participants, std::map<std::string, std::vector<std::string>> groups)
      : participants_(std::move(participants)), groups_(std::move(groups)) {
    std::set<std::string> ids;
    for (const auto& p : participants_) {
      if (p.id.empty()) throw ValidationError("roster", "participant id must be nonempty");
      if (!ids.insert(p.id).second) throw ValidationError("roster", "duplicate participant id '" + p.id + "'");
    }
    for (const auto& [name, members] : groups_)
      for (const auto& m : members)
        if (!ids.count(m)) throw ValidationError("roster", "group '" + name + "' references unknown '" + m + "'");
  }

  /// Every log participant, identified by id only.
  static Roster from_ids(const std::vector<std::string>& ids) {
    std::vector<RosterEntry> entries;
    for (const auto& id : ids) entries.push_back({id, id, {}});
    return Roster(std::move(entries), {});
  }

  static Roster from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("roster", "roster must be a JSON object");
    std::vector<RosterEntry> entries;
    for (const auto& p : j.value("participants", Json::array())) {
      RosterEntry e;
      e.id = p.at("id").get<std::string>();
      e.display_name = p.value("name", e.id);
      e.aliases = p.value("aliases", std::vector<std::string>{});
      entries.push_back(std::move(e));
    }
    std::map<std::string, std::vector<std::string>> groups;
    if (auto it = j.find("groups"); it != j.end())
      for (const auto& [name, members] : it->items()) groups[name] = members.get<std::vector<std::string>>();
    return Roster(std::move(entries), std::move(groups));
  }

  Json to_json() const {
    Json ps = Json::array();
    for (const auto& p : participants_) ps.push_back(Json{{"id", p.id}, {"name", p.display_name}, {"aliases", p.aliases}});
    Json gs = Json::object();
    for (const auto& [name, members] : groups_) gs[name] = members;
    return Json{{"participants", std::move(ps)}, {"groups", std::move(gs)}};
  }

  const std::vector<RosterEntry>& participants() const noexcept { return participants_; }
  const std::map<std::string, std::vector<std::string>>& groups() const noexcept { return groups_; }
  bool empty() const noexcept { return participants_.empty(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& p : participants_) out.push_back(p.id);
    std::sort(out.begin(), out.end());
    return out;
  }

  const RosterEntry* find(std::string_view id) const {
    for (const auto& p : participants_)
      if (p.id == id) return &p;
    return nullptr;
  }

 private:
  std::vector<RosterEntry> participants_;
  std::map<std::string, std::vector<std::string>> groups_;
};

struct ScopeResult {
  std::vector<std::string> subjects;    // sorted participant ids
  std::vector<std::string> matched;     // phrases that matched, in query order
  std::vector<std::string> unresolved;  // @handles naming nobody on the roster
  bool explicit_subject = false;
};

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

/// Longest-match scan of ids, names, aliases and group names at word
/// boundaries (case-insensitive). No match means the whole roster.
inline ScopeResult scope_query(std::string_view query, const Roster& roster) {
  std::map<std::string, std::set<std::string>> phrases;
  for (const auto& p : roster.participants()) {
    phrases[to_lower(p.id)].insert(p.id);
    if (!p.display_name.empty()) phrases[normalize_space_lower(p.display_name)].insert(p.id);
    for (const auto& a : p.aliases)
      if (!a.empty()) phrases[normalize_space_lower(a)].insert(p.id);
  }
  for (const auto& [name, members] : roster.groups())
    phrases[normalize_space_lower(name)].insert(members.begin(), members.end());

  const std::string q = normalize_space_lower(query);
  ScopeResult out;
  std::set<std::string> chosen;
  std::size_t i = 0;
  while (i < q.size()) {
    const bool at_word = detail::is_word_char(q[i]) && (i == 0 || !detail::is_word_char(q[i - 1]));
    if (!at_word) {
      ++i;
      continue;
    }
    std::size_t best_len = 0;
    const std::set<std::string>* best = nullptr;
    for (const auto& [phrase, ids] : phrases) {
      if (phrase.size() <= best_len || q.compare(i, phrase.size(), phrase) != 0) continue;
      const std::size_t end = i + phrase.size();
      if (end < q.size() && detail::is_word_char(q[end]) && detail::is_word_char(phrase.back())) continue;
      best_len = phrase.size();
      best = &ids;
    }
    if (best) {
      out.matched.push_back(q.substr(i, best_len));
      chosen.insert(best->begin(), best->end());
      i += best_len;
    } else {
      while (i < q.size() && detail::is_word_char(q[i])) ++i;
    }
  }

  // @handles that named nobody.
  for (std::size_t at = q.find('@'); at != std::string::npos; at = q.find('@', at + 1)) {
    std::size_t end = at + 1;
    while (end < q.size() && (detail::is_word_char(q[end]) || q[end] == '.' || q[end] == '_' || q[end] == '-')) ++end;
    while (end > at + 1 && !detail::is_word_char(q[end - 1])) --end;
    if (end == at + 1) continue;
    const std::string handle = q.substr(at + 1, end - at - 1);
    if (!phrases.count(handle)) out.unresolved.push_back(handle);
  }

  out.explicit_subject = !chosen.empty();
  if (chosen.empty())
    out.subjects = roster.ids();
  else
    out.subjects.assign(chosen.begin(), chosen.end());
  return out;
}

inline std::vector<std::string> resolve_subjects(std::string_view query, const Roster& roster) {
  return scope_query(query, roster).subjects;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

enum class Stage { Scoping, Modality, Retrieval, Synthesis };
inline constexpr std::size_t kStageCount = 4;

inline std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::Scoping: return "scoping";
    case Stage::Modality: return "modality";
    case Stage::Retrieval: return "retrieval";
    case Stage::Synthesis: return "synthesis";
  }
  return "?";
}

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what)
      : Error(std::string(stage_name(stage)) + " stage: " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct EngineOptions {
  DtsConfig dts;
  RetrievalParams retrieval;
  SelectorMode mode = SelectorMode::Hybrid;
  CueLexicon lexicon = CueLexicon::defaults();
  std::size_t d_q = HashingEmbedder::kDefaultDim;
  /// Run per-participant stages on separate threads.
  bool parallel = false;
  /// Bypass the selector with a fixed distribution (ablations).
  std::optional<ModalityDistribution> modality_override;
};

struct ParticipantTrace {
  std::string participant_id;
  ModalityDistribution modality{};
  std::optional<FilterKind> rule_filter;
  bool used_mlp = false;
  DigitalTwinSignature dts;
  EvidenceSet evidence;

  friend bool operator==(const ParticipantTrace&, const ParticipantTrace&) = default;
};

struct Trace {
  std::string query;
  Instant as_of{};
  std::vector<std::string> domains;
  std::vector<std::string> subjects;
  std::vector<std::string> unresolved;
  std::vector<ParticipantTrace> participants;
  /// Wall-clock stage timings; not part of equality or deterministic output.
  std::map<std::string, double> timings_ms;

  std::vector<EvidenceSet> evidence() const {
    std::vector<EvidenceSet> out;
    for (const auto& p : participants) out.push_back(p.evidence);
    return out;
  }
  const ParticipantTrace* participant(std::string_view id) const {
    for (const auto& p : participants)
      if (p.participant_id == id) return &p;
    return nullptr;
  }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.query == b.query && a.as_of == b.as_of && a.domains == b.domains && a.subjects == b.subjects &&
           a.unresolved == b.unresolved && a.participants == b.participants;
  }
};

struct QueryRun {
  SynthesisResult result;
  Trace trace;
};

/// Owns the ingested log and everything derived from it; answers queries.
class Engine {
 public:
  Engine(EventLog log, DomainRules rules, std::optional<Roster> roster = std::nullopt, EngineOptions options = {},
         TitleNormalizer normalizer = {}, std::shared_ptr<const Embedder> embedder = nullptr)
      : log_(std::move(log)),
        rules_(std::move(rules)),
        options_(std::move(options)),
        embedder_(embedder ? std::move(embedder) : std::make_shared<HashingEmbedder>(options_.d_q)),
        catalog_(log_, rules_, normalizer),
        index_(catalog_, *embedder_, options_.retrieval.bm25_k1) {
    roster_ = roster ? std::move(*roster) : Roster::from_ids(log_.participants());
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EventLog& log() const noexcept { return log_; }
  const Catalog& catalog() const noexcept { return catalog_; }
  const Roster& roster() const noexcept { return roster_; }
  const EngineOptions& options() const noexcept { return options_; }
  const Embedder& embedder() const noexcept { return *embedder_; }
  const ContentIndex& content_index() const noexcept { return index_; }

  /// Query-wide inputs: candidates, cohort statistics and content scores.
  RetrievalScope build_scope(std::string_view query, Instant as_of, const std::vector<std::string>& cohort) const {
    const DtsWindows w(as_of, options_.dts);
    const std::size_t d = catalog_.domains().size();
    RetrievalScope scope;
    scope.log = &log_;
    std::set<std::size_t> touched;
    for (auto i : window_slice_all(log_, w.lookback)) touched.insert(catalog_.artifact_index_of_event(i));
    for (auto a : touched) scope.candidates.push_back(catalog_.artifacts()[a]);
    scope.window_all = observe(log_, catalog_, window_slice_all(log_, w.short_window));
    scope.cohort = cohort_dwell(scope.window_all, cohort);
    scope.cohort_share = cohort_attention_share(scope.window_all, scope.candidates, d);
    scope.embeddings = &index_.embeddings();
    scope.content = index_.score(query, scope.candidates, options_.retrieval.alpha);
    return scope;
  }

  UserContext user_context(const std::string& participant, Instant as_of) const {
    const DtsWindows w(as_of, options_.dts);
    UserContext u;
    u.participant_id = participant;
    u.events = observe(log_, catalog_, window_slice(log_, participant, w.short_window));
    u.sessions = sessionize(u.events, options_.dts.session_gap_s);
    u.dts = assemble_dts(log_, catalog_, participant, as_of, options_.dts);
    u.baseline = baseline_for(log_, catalog_, participant, as_of, options_.dts);
    return u;
  }

  /// Scoped participants that actually appear in the log, sorted by id.
  std::vector<std::string> active_subjects(const std::vector<std::string>& subjects) const {
    std::vector<std::string> out;
    for (const auto& s : subjects)
      if (log_.has_participant(s)) out.push_back(s);
    return out;
  }

  QueryRun run_query(std::string_view query, Instant as_of, const SelectorModel* model,
                     const Synthesizer& synthesizer) const {
    using Clock = std::chrono::steady_clock;
    auto ms_since = [](Clock::time_point t0) {
      return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    QueryRun run;
    Trace& trace = run.trace;
    trace.query = std::string(query);
    trace.as_of = as_of;
    trace.domains = catalog_.domains();

    auto t0 = Clock::now();
    ScopeResult scoped;
    try {
      scoped = scope_query(query, roster_);
    } catch (const std::exception& e) {
      throw StageError(Stage::Scoping, e.what());
    }
    trace.subjects = scoped.subjects;
    trace.unresolved = scoped.unresolved;
    trace.timings_ms["scoping"] = ms_since(t0);

    const auto active = active_subjects(scoped.subjects);
    if (!active.empty()) {
      t0 = Clock::now();
      std::optional<ModalitySelector> selector;
      RetrievalScope scope;
      try {
        selector.emplace(model, *embedder_, options_.lexicon, options_.mode);
      } catch (const std::exception& e) {
        throw StageError(Stage::Modality, e.what());
      }
      try {
        scope = build_scope(query, as_of, active);
      } catch (const std::exception& e) {
        throw StageError(Stage::Retrieval, e.what());
      }

      auto per_participant = [&](const std::string& pid) {
        ParticipantTrace pt;
        pt.participant_id = pid;
        UserContext u;
        Selection sel;
        try {
          u = user_context(pid, as_of);
          if (options_.modality_override)
            sel.distribution = *options_.modality_override;
          else
            sel = selector->select(query, u.dts);
        } catch (const std::exception& e) {
          throw StageError(Stage::Modality, pid + ": " + e.what());
        }
        pt.modality = sel.distribution;
        pt.rule_filter = sel.verdict.filter;
        pt.used_mlp = sel.used_mlp;
        pt.dts = u.dts;
        try {
          pt.evidence = retrieve_for_user(u, scope, pt.modality, options_.retrieval);
        } catch (const std::exception& e) {
          throw StageError(Stage::Retrieval, pid + ": " + e.what());
        }
        return pt;
      };

      if (options_.parallel && active.size() > 1) {
        std::vector<std::future<ParticipantTrace>> futures;
        for (const auto& pid : active) futures.push_back(std::async(std::launch::async, per_participant, pid));
        for (auto& f : futures) trace.participants.push_back(f.get());
      } else {
        for (const auto& pid : active) trace.participants.push_back(per_participant(pid));
      }
      trace.timings_ms["modality_and_retrieval"] = ms_since(t0);
    }

    t0 = Clock::now();
    try {
      run.result = synthesizer.synthesize(query, trace.evidence());
    } catch (const std::exception& e) {
      throw StageError(Stage::Synthesis, e.what());
    }
    trace.timings_ms["synthesis"] = ms_since(t0);
    return run;
  }

 private:
  EventLog log_;
  DomainRules rules_;
  Roster roster_;
  EngineOptions options_;
  std::shared_ptr<const Embedder> embedder_;
  Catalog catalog_;
  ContentIndex index_;
};

// ---------------------------------------------------------------------------
// Trace persistence and replay
// ---------------------------------------------------------------------------

inline Json to_json(const Trace& t, bool include_timings = false) {
  Json ps = Json::array();
  for (const auto& p : t.participants) {
    Json items = Json::array();
    for (const auto& i : p.evidence.items) items.push_back(to_json(i));
    ps.push_back(Json{{"participant_id", p.participant_id},
                      {"modality", to_json(p.modality)},
                      {"rule_filter", p.rule_filter ? Json(std::string(filter_name(*p.rule_filter))) : Json(nullptr)},
                      {"used_mlp", p.used_mlp},
                      {"dts", to_json(p.dts, t.domains)},
                      {"evidence", std::move(items)}});
  }
  Json j{{"query", t.query},
         {"as_of", format_utc(t.as_of)},
         {"domains", t.domains},
         {"subjects", t.subjects},
         {"unresolved", t.unresolved},
         {"participants", std::move(ps)}};
  if (include_timings) j["timings_ms"] = t.timings_ms;
  return j;
}

inline Trace trace_from_json(const Json& j) {
  Trace t;
  t.query = j.at("query").get<std::string>();
  t.as_of = parse_utc(j.at("as_of").get<std::string>());
  t.domains = j.at("domains").get<std::vector<std::string>>();
  t.subjects = j.at("subjects").get<std::vector<std::string>>();
  t.unresolved = j.value("unresolved", std::vector<std::string>{});
  for (const auto& p : j.at("participants")) {
    ParticipantTrace pt;
    pt.participant_id = p.at("participant_id").get<std::string>();
    pt.modality = modality_from_json(p.at("modality"));
    if (const auto& rf = p.at("rule_filter"); !rf.is_null()) pt.rule_filter = filter_from_name(rf.get<std::string>());
    pt.used_mlp = p.value("used_mlp", false);
    pt.dts = dts_from_json(p.at("dts"));
    pt.evidence.participant_id = pt.participant_id;
    for (const auto& i : p.at("evidence")) pt.evidence.items.push_back(evidence_from_json(i));
    t.participants.push_back(std::move(pt));
  }
  if (auto it = j.find("timings_ms"); it != j.end()) t.timings_ms = it->get<std::map<std::string, double>>();
  return t;
}

/// Re-runs synthesis from persisted evidence.
inline SynthesisResult replay(const Trace& trace, const Synthesizer& synthesizer) {
  return synthesizer.synthesize(trace.query, trace.evidence());
}

// ---------------------------------------------------------------------------
// Failure attribution
// ---------------------------------------------------------------------------

struct StageAttribution {
  std::array<double, kStageCount> raw{};
  std::array<double, kStageCount> probabilities{};
  std::optional<FilterKind> best_alternative;  // from the modality probe
  std::string best_participant;                // participant the probe gained most on

  double probability(Stage s) const { return probabilities[static_cast<std::size_t>(s)]; }
  Stage argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kStageCount; ++i)
      if (probabilities[i] > probabilities[best]) best = i;
    return static_cast<Stage>(best);
  }
};

inline std::array<double, kStageCount> normalize_attribution(const std::array<double, kStageCount>& raw,
                                                             double eps = 1e-6) {
  std::array<double, kStageCount> p{};
  double total = 0.0;
  for (std::size_t i = 0; i < kStageCount; ++i) total += (p[i] = std::max(raw[i], 0.0) + eps);
  for (auto& x : p) x /= total;
  return p;
}

inline double synthesis_fault(const SynthesisResult& result, const std::vector<EvidenceSet>& evidence) {
  if (result.proposals.empty()) return 0.0;
  std::set<std::string> refs;
  for (const auto& s : evidence)
    for (const auto& i : s.items) refs.insert(i.ref());
  double bad = 0.0;
  for (const auto& p : result.proposals) {
    bool ok = !p.evidence_refs.empty();
    for (const auto& r : p.evidence_refs) ok = ok && refs.count(r) != 0;
    if (!ok) bad += 1.0;
  }
  return bad / static_cast<double>(result.proposals.size());
}

inline std::array<double, kFilterCount> modality_probe_gains(const Engine& engine, const Trace& trace,
                                                             const RetrievalScope& scope, const ParticipantTrace& p) {
  const auto u = engine.user_context(p.participant_id, trace.as_of);
  const auto& params = engine.options().retrieval;
  const auto maps = compute_filter_maps(u, scope, params.filters);
  const double chosen = mean_content(p.evidence);
  std::array<double, kFilterCount> gains{};
  for (std::size_t k = 0; k < kFilterCount; ++k)
    gains[k] = mean_content(rank_evidence(u, scope, maps, one_hot(filter_at(k)), params)) - chosen;
  return gains;
}

inline StageAttribution attribute_failure(const Engine& engine, const Trace& trace, const SynthesisResult& result,
                                          double eps = 1e-6) {
  StageAttribution a;
  a.raw[static_cast<std::size_t>(Stage::Scoping)] = (trace.subjects.empty() || !trace.unresolved.empty()) ? 1.0 : 0.0;

  double max_content = 0.0;
  for (const auto& p : trace.participants)
    for (const auto& i : p.evidence.items) max_content = std::max(max_content, i.content);
  a.raw[static_cast<std::size_t>(Stage::Retrieval)] = 1.0 - max_content;

  if (!trace.participants.empty()) {
    std::vector<std::string> ids;
    for (const auto& p : trace.participants) ids.push_back(p.participant_id);
    const auto scope = engine.build_scope(trace.query, trace.as_of, ids);
    std::array<double, kFilterCount> mean_gain{};
    std::vector<std::array<double, kFilterCount>> gains;
    for (const auto& p : trace.participants) {
      gains.push_back(modality_probe_gains(engine, trace, scope, p));
      for (std::size_t k = 0; k < kFilterCount; ++k) mean_gain[k] += gains.back()[k];
    }
    std::size_t best = 0;
    for (std::size_t k = 0; k < kFilterCount; ++k) {
      mean_gain[k] /= static_cast<double>(gains.size());
      if (mean_gain[k] > mean_gain[best]) best = k;
    }
    a.best_alternative = filter_at(best);
    a.raw[static_cast<std::size_t>(Stage::Modality)] = std::max(0.0, mean_gain[best]);
    std::size_t who = 0;
    for (std::size_t i = 1; i < gains.size(); ++i)
      if (gains[i][best] > gains[who][best]) who = i;
    a.best_participant = trace.participants[who].participant_id;
  }

  a.raw[static_cast<std::size_t>(Stage::Synthesis)] = synthesis_fault(result, trace.evidence());
  a.probabilities = normalize_attribution(a.raw, eps);
  return a;
}

// ---------------------------------------------------------------------------
// Feedback
// ---------------------------------------------------------------------------

enum class FeedbackAction { NoOp, SelectorUpdated };

struct FeedbackRecord {
  std::string query_id;
  int satisfaction = 1;
  StageAttribution attribution;
  FeedbackAction action = FeedbackAction::NoOp;
  std::string reason;
};

/// Readers take a frozen snapshot; updates copy, modify and swap under an
/// exclusive lock.
class ModelStore {
 public:
  ModelStore() = default;
  explicit ModelStore(SelectorModel model) : model_(std::make_shared<const SelectorModel>(std::move(model))) {}

  std::shared_ptr<const SelectorModel> snapshot() const {
    std::shared_lock lock(mu_);
    return model_;
  }

  template <class F>
  bool update(F&& mutate) {
    std::unique_lock lock(mu_);
    if (!model_) return false;
    auto next = std::make_shared<SelectorModel>(*model_);
    mutate(*next);
    model_ = std::move(next);
    return true;
  }

  void reset(SelectorModel model) {
    std::unique_lock lock(mu_);
    model_ = std::make_shared<const SelectorModel>(std::move(model));
  }

 private:
  mutable std::shared_mutex mu_;
  std::shared_ptr<const SelectorModel> model_;
};

struct FeedbackParams {
  double threshold = 0.5;
  double learning_rate = 0.05;
};

struct FeedbackOutcome {
  bool updated = false;
  std::optional<TrainingExample> example;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

inline std::string_view feedback_action_name(FeedbackAction a) {
  return a == FeedbackAction::SelectorUpdated ? "selector-updated" : "no-op";
}

/// s=1 → no-op. s=0 with modality attribution ≥ threshold → one gradient step
/// toward the probe's best alternative filter for the probe's participant.
inline FeedbackOutcome apply_feedback(FeedbackRecord& record, const Trace& trace, ModelStore& store,
                                      const Embedder& embedder, const FeedbackParams& params = {},
                                      std::vector<TrainingExample>* dataset = nullptr, std::ostream* log = nullptr) {
  FeedbackOutcome out;
  record.action = FeedbackAction::NoOp;
  const double m = record.attribution.probability(Stage::Modality);
  const ParticipantTrace* p = trace.participant(record.attribution.best_participant);
  if (record.satisfaction != 0) {
    record.reason = "satisfied";
  } else if (m < params.threshold) {
    record.reason = "modality attribution " + detail::fmt_num(m, 3) + " below threshold " +
                    detail::fmt_num(params.threshold, 3);
  } else if (!record.attribution.best_alternative || !p) {
    record.reason = "modality probe produced no alternative";
  } else if (!store.snapshot()) {
    record.reason = "no selector model loaded";
  } else {
    TrainingExample ex{trace.query, p->dts.features(), *record.attribution.best_alternative};
    const auto prepared = prepare(ex, embedder);
    store.update([&](SelectorModel& model) {
      const auto lg = loss_and_gradient(model, std::span<const PreparedExample>(&prepared, 1));
      out.loss_before = lg.loss;
      model.axpy(-params.learning_rate, lg.gradient);
      out.loss_after = mean_loss(model, std::span<const PreparedExample>(&prepared, 1));
    });
    out.updated = true;
    out.example = ex;
    if (dataset) dataset->push_back(ex);
    record.action = FeedbackAction::SelectorUpdated;
    record.reason = "modality attribution " + detail::fmt_num(m, 3) + "; trained toward " +
                    std::string(filter_name(*record.attribution.best_alternative));
  }
  if (log)
    *log << "feedback " << record.query_id << ": " << feedback_action_name(record.action) << " (" << record.reason
         << ")\n";
  return out;
}

inline Json to_json(const StageAttribution& a) {
  Json probs = Json::object();
  for (std::size_t i = 0; i < kStageCount; ++i) probs[std::string(stage_name(static_cast<Stage>(i)))] = a.probabilities[i];
  return Json{{"probabilities", std::move(probs)},
              {"best_alternative",
               a.best_alternative ? Json(std::string(filter_name(*a.best_alternative))) : Json(nullptr)},
              {"best_participant", a.best_participant}};
}

inline Json to_json(const FeedbackRecord& r) {
  return Json{{"query_id", r.query_id},
              {"satisfaction", r.satisfaction},
              {"attribution", to_json(r.attribution)},
              {"action", std::string(feedback_action_name(r.action))},
              {"reason", r.reason}};
}

}  // namespace xsynth
