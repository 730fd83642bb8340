#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "xsynth/common.hpp"

namespace xsynth {

using Json = nlohmann::ordered_json;

using Attributes = std::vector<std::pair<std::string, std::string>>;

/// One observed interaction. Field names follow the JSONL schema.
struct InteractionEvent {
  std::string participant_id;
  std::string app;
  Instant ts;
  std::string screen_title;
  Attributes ui_attributes;
  std::string screen_text;
  std::string action;
  double dwell = 0.0;  // seconds

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : ui_attributes)
      if (k == key) return &v;
    return nullptr;
  }

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

inline Json to_json(const InteractionEvent& e) {
  Json attrs = Json::array();
  for (const auto& [k, v] : e.ui_attributes) attrs.push_back(Json{{"key", k}, {"value", v}});
  return Json{{"participant_id", e.participant_id},
              {"app", e.app},
              {"ts", format_utc(e.ts)},
              {"screen_title", e.screen_title},
              {"ui_attributes", std::move(attrs)},
              {"screen_text", e.screen_text},
              {"action", e.action},
              {"dwell_s", e.dwell}};
}

inline std::string serialize_event(const InteractionEvent& e) { return to_json(e).dump(); }

namespace detail {

inline const Json& require(const Json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) throw ParseError(field, "missing");
  return *it;
}

inline std::string require_string(const Json& obj, const char* field, bool nonempty) {
  const Json& v = require(obj, field);
  if (!v.is_string()) throw ParseError(field, "expected string");
  auto s = v.get<std::string>();
  if (nonempty && s.empty()) throw ParseError(field, "must be nonempty");
  return s;
}

}  // namespace detail

inline InteractionEvent event_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("record", "expected a JSON object");
  InteractionEvent e;
  e.participant_id = detail::require_string(j, "participant_id", true);
  e.app = detail::require_string(j, "app", true);
  e.ts = parse_utc(detail::require_string(j, "ts", true));
  e.screen_title = detail::require_string(j, "screen_title", false);
  e.action = detail::require_string(j, "action", true);

  const Json& dwell = detail::require(j, "dwell_s");
  if (!dwell.is_number()) throw ParseError("dwell_s", "expected number");
  e.dwell = dwell.get<double>();
  if (!(e.dwell >= 0.0)) throw ValidationError("dwell_s", "must be >= 0");

  if (auto it = j.find("screen_text"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("screen_text", "expected string");
    e.screen_text = it->get<std::string>();
  }
  if (auto it = j.find("ui_attributes"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("ui_attributes", "expected array");
    for (const auto& kv : *it) {
      if (!kv.is_object() || !kv.contains("key") || !kv.contains("value") || !kv["key"].is_string() ||
          !kv["value"].is_string())
        throw ParseError("ui_attributes", "entries must be {key, value} strings");
      e.ui_attributes.emplace_back(kv["key"].get<std::string>(), kv["value"].get<std::string>());
    }
  }
  return e;
}

/// Parses one JSONL record. Throws ParseError naming the field, or
/// ValidationError for a negative dwell.
inline InteractionEvent parse_event(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError("record", ex.what());
  }
  return event_from_json(j);
}

// ---------------------------------------------------------------------------
// EventLog
// ---------------------------------------------------------------------------

/// Immutable, time-ordered event log with a per-participant, per-day index.
class EventLog {
 public:
  EventLog() = default;

  explicit EventLog(std::vector<InteractionEvent> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) { return a.ts < b.ts; });
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      by_participant_[e.participant_id].push_back(i);
      by_day_[e.participant_id][epoch_seconds(day_floor(e.ts))].push_back(i);
    }
  }

  const std::vector<InteractionEvent>& events() const noexcept { return events_; }
  const InteractionEvent& operator[](std::size_t i) const { return events_.at(i); }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  std::vector<std::string> participants() const {
    std::vector<std::string> out;
    out.reserve(by_participant_.size());
    for (const auto& [p, _] : by_participant_) out.push_back(p);
    return out;
  }

  bool has_participant(const std::string& p) const { return by_participant_.count(p) != 0; }

  /// Indices of the participant's events, time-ordered. Empty if unknown.
  std::span<const std::size_t> participant_events(const std::string& p) const {
    auto it = by_participant_.find(p);
    if (it == by_participant_.end()) return {};
    return it->second;
  }

  /// Day (epoch seconds of UTC midnight) → event indices for a participant.
  const std::map<std::int64_t, std::vector<std::size_t>>& participant_days(const std::string& p) const {
    static const std::map<std::int64_t, std::vector<std::size_t>> kEmpty;
    auto it = by_day_.find(p);
    return it == by_day_.end() ? kEmpty : it->second;
  }

  std::optional<Instant> first_ts() const {
    if (events_.empty()) return std::nullopt;
    return events_.front().ts;
  }
  std::optional<Instant> last_ts() const {
    if (events_.empty()) return std::nullopt;
    return events_.back().ts;
  }

  /// Canonical JSONL: one event per line, newline-terminated.
  std::string serialize() const {
    std::string out;
    for (const auto& e : events_) {
      out += serialize_event(e);
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<InteractionEvent> events_;
  std::map<std::string, std::vector<std::size_t>> by_participant_;
  std::map<std::string, std::map<std::int64_t, std::vector<std::size_t>>> by_day_;
};

struct Rejection {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestResult {
  EventLog log;
  std::size_t accepted = 0;
  std::vector<Rejection> rejected;
};

/// Reads JSONL records. Blank lines are skipped; bad lines are collected,
/// never fatal.
inline IngestResult ingest(std::istream& in) {
  std::vector<InteractionEvent> events;
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      events.push_back(parse_event(line));
    } catch (const InputError& ex) {
      result.rejected.push_back({line_no, ex.what()});
    }
  }
  result.accepted = events.size();
  result.log = EventLog{std::move(events)};
  return result;
}

/// Indices of the participant's events with start <= ts < end, in order.
inline std::vector<std::size_t> window_slice(const EventLog& log, const std::string& participant,
                                             const Window& w) {
  auto idx = log.participant_events(participant);
  auto by_ts = [&](std::size_t i, Instant t) { return log[i].ts < t; };
  auto lo = std::lower_bound(idx.begin(), idx.end(), w.start, by_ts);
  auto hi = std::lower_bound(lo, idx.end(), w.end, by_ts);
  return {lo, hi};
}

/// All events (any participant) with start <= ts < end.
inline std::vector<std::size_t> window_slice_all(const EventLog& log, const Window& w) {
  const auto& ev = log.events();
  auto lo = std::lower_bound(ev.begin(), ev.end(), w.start,
                             [](const InteractionEvent& e, Instant t) { return e.ts < t; });
  auto hi = std::lower_bound(lo, ev.end(), w.end,
                             [](const InteractionEvent& e, Instant t) { return e.ts < t; });
  std::vector<std::size_t> out;
  for (auto it = lo; it != hi; ++it) out.push_back(static_cast<std::size_t>(it - ev.begin()));
  return out;
}

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kDefaultSessionGapSeconds = 1800;

/// A maximal run of events whose consecutive gaps are below the threshold.
/// `begin`/`end` are offsets into the sequence that was sessionized.
struct Session {
  std::string participant_id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::int64_t gap_threshold = kDefaultSessionGapSeconds;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Session&, const Session&) = default;
};

/// Works on any time-ordered, single-participant sequence whose elements
/// expose `ts` and `participant_id`.
template <class Event>
std::vector<Session> sessionize(std::span<const Event> events,
                                std::int64_t gap_threshold = kDefaultSessionGapSeconds) {
  std::vector<Session> sessions;
  if (events.empty()) return sessions;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= events.size(); ++i) {
    if (i == events.size() || (events[i].ts - events[i - 1].ts).count() >= gap_threshold) {
      sessions.push_back({events[begin].participant_id, begin, i, gap_threshold});
      begin = i;
    }
  }
  return sessions;
}

template <class Event>
std::vector<Session> sessionize(const std::vector<Event>& events,
                                std::int64_t gap_threshold = kDefaultSessionGapSeconds) {
  return sessionize(std::span<const Event>(events), gap_threshold);
}

// ---------------------------------------------------------------------------
// Artifacts and domains
// ---------------------------------------------------------------------------

struct Artifact {
  std::string artifact_id;
  std::string app;
  std::string title_key;
  std::string domain;
  std::size_t domain_index = 0;

  friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct DomainRule {
  std::string app_pattern;    // "*" matches anything; otherwise case-insensitive regex search
  std::string title_pattern;
  std::string domain;
};

/// First-match-wins mapping from (app, title) to a domain label. The last
/// rule must be the wildcard default.
class DomainRules {
 public:
  explicit DomainRules(std::vector<DomainRule> rules) : rules_(std::move(rules)) {
    if (rules_.empty()) throw ConfigError("domain rules: at least the default entry is required");
    const auto& last = rules_.back();
    if (!is_wildcard(last.app_pattern) || !is_wildcard(last.title_pattern))
      throw ConfigError("domain rules: trailing default entry ({\"*\",\"*\"}) required");
    for (const auto& r : rules_) {
      if (r.domain.empty()) throw ConfigError("domain rules: empty domain label");
      if (std::find(labels_.begin(), labels_.end(), r.domain) == labels_.end()) labels_.push_back(r.domain);
      try {
        compiled_.push_back({compile(r.app_pattern), compile(r.title_pattern)});
      } catch (const std::regex_error& ex) {
        throw ConfigError(std::string("domain rules: bad pattern: ") + ex.what());
      }
    }
    for (std::size_t i = 0; i < rules_.size(); ++i)
      rule_domain_.push_back(static_cast<std::size_t>(
          std::find(labels_.begin(), labels_.end(), rules_[i].domain) - labels_.begin()));
  }

  /// The built-in eight-domain taxonomy used by the synthetic corpus.
  static DomainRules defaults() {
    return DomainRules{{
        {"^meridian$", "*", "accounts"},
        {"^vault$", "*", "contracts"},
        {"^helix$", "*", "support"},
        {"^pricebook$", "*", "pricing"},
        {"^(gmail|slack|outlook|teams)$", "*", "messaging"},
        {"^lens$", "*", "analytics"},
        {"^(intranet|newsletter|digest)$", "*", "marketing"},
        {"*", "*", "internal"},
    }};
  }

  static DomainRules from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("domain rules: expected a JSON array");
    std::vector<DomainRule> rules;
    for (const auto& r : j) {
      if (!r.is_object()) throw ConfigError("domain rules: entries must be objects");
      rules.push_back({r.value("app_pattern", "*"), r.value("title_pattern", "*"), r.value("domain", "")});
    }
    return DomainRules{std::move(rules)};
  }

  Json to_json() const {
    Json out = Json::array();
    for (const auto& r : rules_)
      out.push_back(Json{{"app_pattern", r.app_pattern}, {"title_pattern", r.title_pattern}, {"domain", r.domain}});
    return out;
  }

  /// Domain labels in first-appearance order; this fixes every d-vector's layout.
  const std::vector<std::string>& domains() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::size_t classify(std::string_view app, std::string_view title) const {
    const std::string a(app), t(title);
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
      const auto& [ra, rt] = compiled_[i];
      if ((!ra || std::regex_search(a, *ra)) && (!rt || std::regex_search(t, *rt))) return rule_domain_[i];
    }
    return rule_domain_.back();
  }

  std::size_t index_of(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw NotFoundError("unknown domain '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

 private:
  static bool is_wildcard(const std::string& p) { return p.empty() || p == "*"; }

  static std::optional<std::regex> compile(const std::string& p) {
    if (is_wildcard(p)) return std::nullopt;
    return std::regex(p, std::regex::ECMAScript | std::regex::icase);
  }

  std::vector<DomainRule> rules_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> rule_domain_;
  std::vector<std::pair<std::optional<std::regex>, std::optional<std::regex>>> compiled_;
};

/// Lowercase + whitespace collapse, then strips a trailing suffix matched by
/// any configured version-noise pattern (e.g. `\s+v\d+(\.\d+)*`).
class TitleNormalizer {
 public:
  TitleNormalizer() = default;
  explicit TitleNormalizer(const std::vector<std::string>& suffix_patterns) {
    for (const auto& p : suffix_patterns) {
      try {
        patterns_.emplace_back("(?:" + p + ")$", std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& ex) {
        throw ConfigError("bad version-noise pattern '" + p + "': " + ex.what());
      }
    }
  }

  std::string operator()(std::string_view title) const {
    std::string key = normalize_space_lower(title);
    for (const auto& re : patterns_) {
      std::smatch m;
      if (std::regex_search(key, m, re) && m.position(0) > 0) {
        key = normalize_space_lower(key.substr(0, static_cast<std::size_t>(m.position(0))));
        break;
      }
    }
    return key;
  }

 private:
  std::vector<std::regex> patterns_;
};

inline std::string make_artifact_id(std::string_view app, std::string_view title_key) {
  std::string key = to_lower(app);
  key.push_back('\x1f');
  key.append(title_key);
  return "a" + to_hex(fnv1a64(key));
}

inline Artifact derive_artifact(const InteractionEvent& e, const DomainRules& rules,
                                const TitleNormalizer& normalize = {}) {
  Artifact a;
  a.app = e.app;
  a.title_key = normalize(e.screen_title);
  a.artifact_id = make_artifact_id(e.app, a.title_key);
  a.domain_index = rules.classify(e.app, e.screen_title);
  a.domain = rules.domains()[a.domain_index];
  return a;
}

/// All artifacts referenced by a log, with the event → artifact mapping and
/// the aggregated text used for content scoring.
class Catalog {
 public:
  Catalog() = default;

  Catalog(const EventLog& log, const DomainRules& rules, const TitleNormalizer& normalize = {})
      : domains_(rules.domains()) {
    std::unordered_map<std::string, std::size_t> first_index;
    std::vector<Artifact> found;
    std::vector<std::size_t> raw_of_event;
    std::vector<std::string> titles;
    std::vector<std::vector<std::string>> texts;
    std::map<std::pair<std::string, std::string>, std::size_t> memo;
    raw_of_event.reserve(log.size());
    for (const auto& e : log.events()) {
      auto memo_key = std::make_pair(e.app, e.screen_title);
      auto m = memo.find(memo_key);
      std::size_t idx;
      if (m != memo.end()) {
        idx = m->second;
      } else {
        Artifact a = derive_artifact(e, rules, normalize);
        auto [it, inserted] = first_index.try_emplace(a.artifact_id, found.size());
        if (inserted) {
          found.push_back(a);
          titles.push_back(e.screen_title);
          texts.emplace_back();
        }
        idx = it->second;
        memo.emplace(memo_key, idx);
      }
      raw_of_event.push_back(idx);
      auto& t = texts[idx];
      std::string piece = e.screen_text;
      for (const auto& [k, v] : e.ui_attributes) piece += " " + k + " " + v;
      if (!piece.empty() && std::find(t.begin(), t.end(), piece) == t.end()) t.push_back(std::move(piece));
    }
    // Canonical order: by artifact_id.
    std::vector<std::size_t> order(found.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return found[a].artifact_id < found[b].artifact_id; });
    std::vector<std::size_t> remap(found.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      remap[order[pos]] = pos;
      artifacts_.push_back(found[order[pos]]);
      std::string text = titles[order[pos]];
      for (const auto& piece : texts[order[pos]]) text += "\n" + piece;
      texts_.push_back(std::move(text));
      by_id_.emplace(artifacts_.back().artifact_id, pos);
    }
    event_artifact_.reserve(raw_of_event.size());
    for (auto raw : raw_of_event) event_artifact_.push_back(remap[raw]);
  }

  const std::vector<Artifact>& artifacts() const noexcept { return artifacts_; }
  const std::vector<std::string>& domains() const noexcept { return domains_; }
  std::size_t size() const noexcept { return artifacts_.size(); }

  std::size_t artifact_index_of_event(std::size_t event_index) const { return event_artifact_.at(event_index); }
  const Artifact& artifact_of_event(std::size_t event_index) const {
    return artifacts_[event_artifact_.at(event_index)];
  }

  const Artifact* find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &artifacts_[it->second];
  }
  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  /// Original title followed by each distinct screen text (with ui attributes).
  const std::string& text(std::size_t artifact_index) const { return texts_.at(artifact_index); }

 private:
  std::vector<std::string> domains_;
  std::vector<Artifact> artifacts_;
  std::vector<std::string> texts_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::size_t> event_artifact_;
};

/// An event resolved against the catalog; the unit the filters consume.
struct Observation {
  std::size_t event = 0;  // index into the EventLog
  Instant ts;
  std::string participant_id;
  std::string artifact_id;
  std::size_t domain = 0;
  double dwell = 0.0;
  std::string action;
};

inline std::vector<Observation> observe(const EventLog& log, const Catalog& catalog,
                                        std::span<const std::size_t> slice) {
  std::vector<Observation> out;
  out.reserve(slice.size());
  for (auto i : slice) {
    const auto& e = log[i];
    const auto& a = catalog.artifact_of_event(i);
    out.push_back({i, e.ts, e.participant_id, a.artifact_id, a.domain_index, e.dwell, e.action});
  }
  return out;
}

}  // namespace xsynth
