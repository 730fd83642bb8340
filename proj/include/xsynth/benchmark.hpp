#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "xsynth/pipeline.hpp"

namespace xsynth {

inline constexpr std::string_view kFilingAction = "file_opportunity";

// ---------------------------------------------------------------------------
// Ground truth and instances
// ---------------------------------------------------------------------------

struct GroundTruthFiling {
  std::string instance_id;
  std::string participant_id;
  Instant ts{};
  std::string account;
  std::string description;
  Attributes attributes;
  std::size_t source_event = 0;  // index into the source log

  /// Identity used for round-trip comparison (independent of instance ids).
  friend bool same_filing(const GroundTruthFiling& a, const GroundTruthFiling& b) {
    return a.participant_id == b.participant_id && a.ts == b.ts && a.account == b.account &&
           a.description == b.description && a.attributes == b.attributes;
  }
};

inline GroundTruthFiling filing_from_event(const InteractionEvent& e, std::size_t index) {
  GroundTruthFiling f;
  f.participant_id = e.participant_id;
  f.ts = e.ts;
  const std::string* account = e.attribute("account");
  f.account = account ? *account : e.screen_title;
  f.description = e.screen_text.empty() ? e.screen_title : e.screen_text;
  f.attributes = e.ui_attributes;
  f.source_event = index;
  return f;
}

struct BenchmarkInstance {
  std::string instance_id;
  std::string participant_id;  // subject the system is asked about
  Instant as_of{};             // pivot time (exclusive end of the input window)
  std::vector<InteractionEvent> events;
  std::optional<GroundTruthFiling> label;

  bool positive() const noexcept { return label.has_value(); }
};

using FilingPredicate = std::function<bool(const InteractionEvent&)>;

inline FilingPredicate default_filing_predicate() {
  return [](const InteractionEvent& e) { return e.action == kFilingAction; };
}

struct NegativeSampling {
  /// Negatives per positive; the default mirrors a 210:92 split.
  double ratio = 92.0 / 210.0;
  /// Used when there are no positives to scale from.
  std::size_t min_count = 0;
  std::uint64_t seed = 7;
  /// A sampled time is filing-free if the participant files nothing in
  /// [t - preceding window, t + clearance).
  std::int64_t clearance_s = kSecondsPerDay;
  std::size_t max_attempts_per_instance = 200;
};

struct ExtractParams {
  std::int64_t preceding_days = 4;
  std::int64_t session_gap_s = kDefaultSessionGapSeconds;
  NegativeSampling negatives;
};

namespace detail {

/// Events of one filing act: the filing itself plus the participant's
/// same-session interactions with the filing screen (same app and title).
inline std::set<std::size_t> filing_act(const EventLog& log, std::size_t pivot, std::int64_t session_gap_s,
                                        const FilingPredicate& is_filing) {
  std::set<std::size_t> out{pivot};
  const auto& p = log[pivot];
  const auto idx = log.participant_events(p.participant_id);
  auto pos = std::find(idx.begin(), idx.end(), pivot);
  const std::string title = normalize_space_lower(p.screen_title);
  auto same_screen = [&](const InteractionEvent& e) {
    return e.app == p.app && normalize_space_lower(e.screen_title) == title;
  };
  // Walk outward while the session continues.
  for (auto it = pos; it != idx.begin();) {
    auto prev = std::prev(it);
    if ((log[*it].ts - log[*prev].ts).count() >= session_gap_s) break;
    if (same_screen(log[*prev]) && !is_filing(log[*prev])) out.insert(*prev);
    it = prev;
  }
  for (auto it = pos; std::next(it) != idx.end(); ++it) {
    auto next = std::next(it);
    if ((log[*next].ts - log[*it].ts).count() >= session_gap_s) break;
    if (same_screen(log[*next]) && !is_filing(log[*next])) out.insert(*next);
  }
  return out;
}

inline std::string numbered(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", std::string(prefix).c_str(), n);
  return buf;
}

}  // namespace detail

/// One positive per filing plus sampled filing-free negatives. Every
/// instance input is the whole organization's activity in the preceding
/// window with all filing acts removed.
inline std::vector<BenchmarkInstance> extract_instances(const EventLog& log,
                                                        const FilingPredicate& is_filing = default_filing_predicate(),
                                                        const ExtractParams& params = {}) {
  std::vector<std::size_t> filings;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (is_filing(log[i])) filings.push_back(i);

  std::set<std::size_t> removed;
  for (auto f : filings) {
    const auto act = detail::filing_act(log, f, params.session_gap_s, is_filing);
    removed.insert(act.begin(), act.end());
  }

  const auto window_events = [&](Instant end) {
    std::vector<InteractionEvent> out;
    const Window w = Window::ending_at(end, params.preceding_days);
    for (auto i : window_slice_all(log, w))
      if (!removed.count(i) && !is_filing(log[i])) out.push_back(log[i]);
    return out;
  };

  std::vector<BenchmarkInstance> out;
  std::size_t n = 0;
  for (auto f : filings) {
    BenchmarkInstance inst;
    inst.instance_id = detail::numbered("pos", ++n);
    inst.participant_id = log[f].participant_id;
    inst.as_of = log[f].ts;
    inst.events = window_events(inst.as_of);
    inst.label = filing_from_event(log[f], f);
    inst.label->instance_id = inst.instance_id;
    out.push_back(std::move(inst));
  }

  const auto& neg = params.negatives;
  const auto target = std::max<std::size_t>(
      neg.min_count, static_cast<std::size_t>(std::llround(static_cast<double>(filings.size()) * neg.ratio)));
  const auto participants = log.participants();
  if (target == 0 || participants.empty()) return out;
  const auto first = log.first_ts(), last = log.last_ts();
  const std::int64_t lo = epoch_seconds(day_floor(*first)) + params.preceding_days * kSecondsPerDay;
  const std::int64_t hi = epoch_seconds(*last);
  if (hi <= lo) return out;

  std::map<std::string, std::vector<Instant>> filings_by;
  for (auto f : filings) filings_by[log[f].participant_id].push_back(log[f].ts);
  std::mt19937_64 rng(neg.seed);
  std::set<std::pair<std::string, std::int64_t>> seen;
  std::vector<BenchmarkInstance> negatives;
  for (std::size_t attempt = 0; negatives.size() < target && attempt < target * neg.max_attempts_per_instance;
       ++attempt) {
    const auto& who = participants[rng() % participants.size()];
    const std::int64_t t = lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo));
    const Instant at = from_epoch(t);
    bool clear = true;
    for (auto ft : filings_by[who])
      if (ft >= at - days(params.preceding_days) && ft < at + Seconds{neg.clearance_s}) clear = false;
    if (!clear || !seen.emplace(who, t).second) continue;
    BenchmarkInstance inst;
    inst.participant_id = who;
    inst.as_of = at;
    inst.events = window_events(at);
    negatives.push_back(std::move(inst));
  }
  std::sort(negatives.begin(), negatives.end(), [](const auto& a, const auto& b) {
    return std::tie(a.as_of, a.participant_id) < std::tie(b.as_of, b.participant_id);
  });
  n = 0;
  for (auto& inst : negatives) {
    inst.instance_id = detail::numbered("neg", ++n);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct GeneratorApps {
  std::string mail = "Gmail";
  std::string chat = "Slack";
  std::string meetings = "Teams";
  std::string crm = "Meridian";
  std::string contracts = "Vault";
  std::string support = "Helix";
  std::string pricing = "Pricebook";
  std::string reports = "Lens";
  std::string newsletter = "Newsletter";
  std::string wiki = "Wiki";
};

struct GeneratorVocabulary {
  std::vector<std::string> worker_names{"Sam Chen", "Dana Kim", "Priya Natarajan", "Luis Ortega", "Mei Tanaka",
                                        "Omar Haddad", "Greta Lind", "Tomas Novak"};
  std::vector<std::string> accounts{
      "Acme Corp",        "Globex",           "Initech",         "Umbrella Health",  "Stark Logistics",
      "Wayne Financial",  "Hooli",            "Vandelay Imports", "Soylent Foods",   "Tyrell Systems",
      "Cyberdyne",        "Wonka Retail",     "Oscorp Energy",   "Massive Dynamic",  "Nakatomi Trading",
      "Gringotts Bank",   "Aperture Labs",    "Black Mesa",      "Pied Piper",       "Dunder Paper",
      "Sterling Cooper",  "Prestige Worldwide", "Monarch Insurance", "Blue Sun Media"};
  std::vector<std::string> modules{"streaming module", "analytics add-on", "security add-on", "storage tier",
                                   "api gateway",      "compliance pack",  "mobile sdk",      "data residency option"};
  std::vector<std::string> competitors{"RiverFlow", "Nimbus Data", "Quasar Cloud", "Helios DB", "Ostrich Labs"};
  std::vector<std::string> contacts{"J. Winters", "P. Alvarez", "K. Osei", "M. Laurent", "R. Ito", "L. Brandt"};
  std::vector<std::string> internal_topics{"weekly pipeline review", "expense report", "team offsite",
                                           "quarterly targets",      "training schedule", "travel booking",
                                           "holiday calendar",       "new hire onboarding"};
  std::vector<std::string> support_issues{"password reset", "invoice question", "sso configuration",
                                          "export timeout",  "user provisioning", "report formatting"};
  std::vector<std::string> channels{"general", "sales-floor", "random", "announcements"};
  std::vector<std::string> chatter{"lunch order is in the kitchen", "parking lot closes early friday",
                                   "reminder to submit timesheets", "all hands moved to thursday",
                                   "printer on floor 3 is fixed"};
  std::vector<std::string> wiki_pages{"travel policy", "expense guidelines", "brand style guide", "it helpdesk faq",
                                      "benefits overview"};
  std::vector<std::string> campaigns{"expansion opportunities", "new business opportunities",
                                     "competitor pricing watch", "license growth outlook"};
};

struct GeneratorConfig {
  std::uint64_t seed = 7;
  std::size_t workers = 5;
  std::size_t days = 25;
  std::string start = "2026-03-02T00:00:00Z";
  std::size_t planted = 42;
  std::size_t narrative_span_days = 4;
  double collaborator_probability = 0.4;
  double competitor_probability = 0.7;
  std::size_t noise_events_per_day = 36;
  std::size_t decoys_per_day = 1;
  std::size_t book_size = 5;  // routine accounts per worker
  GeneratorApps apps;
  GeneratorVocabulary vocabulary;

  void validate() const {
    if (narrative_span_days < 1) throw ConfigError("narrative_span_days must be >= 1");
    if (narrative_span_days > days) throw ConfigError("narrative span exceeds the number of days");
    if (planted > 0 && workers == 0) throw ConfigError("planted opportunities need at least one worker");
    if (planted > workers * (days - narrative_span_days + 1))
      throw ConfigError("more planted opportunities than (worker, filing day) slots");
    const auto& v = vocabulary;
    if (v.accounts.empty() || v.modules.empty() || v.competitors.empty() || v.internal_topics.empty() ||
        v.support_issues.empty() || v.channels.empty() || v.chatter.empty() || v.wiki_pages.empty() ||
        v.campaigns.empty() || v.contacts.empty())
      throw ConfigError("vocabulary tables must be nonempty");
    Instant t;
    if (!try_parse_utc(start, t)) throw ConfigError("start must be an ISO-8601 UTC timestamp");
  }
};

struct Corpus {
  EventLog log;
  std::vector<GroundTruthFiling> filings;  // in filing-time order
  Roster roster;
};

namespace detail {

class GenRng {
 public:
  explicit GenRng(std::uint64_t seed) : g_(seed) {}
  double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); }
  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(below(static_cast<std::size_t>(hi - lo + 1)));
  }
  bool chance(double p) { return unit() < p; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 g_;
};

inline std::string alias_for(const std::string& name) {
  const auto parts = tokenize(name);
  if (parts.size() < 2) return to_lower(name);
  return parts.front().substr(0, 1) + "." + parts.back();
}

}  // namespace detail

/// Multi-worker activity with planted multi-day opportunity narratives, each
/// ending in a filing event, over routine work and broadcast noise.
inline Corpus generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  using detail::GenRng;
  GenRng rng(cfg.seed);
  const auto& v = cfg.vocabulary;
  const auto& apps = cfg.apps;
  const Instant start = day_floor(parse_utc(cfg.start));
  auto at = [&](std::size_t day, std::int64_t seconds_into_day) {
    return start + days(static_cast<std::int64_t>(day)) + Seconds{seconds_into_day};
  };
  constexpr std::int64_t H = 3600;

  // Roster.
  std::vector<RosterEntry> entries;
  std::vector<std::string> ids, names;
  for (std::size_t w = 0; w < cfg.workers; ++w) {
    const std::string id = "w" + std::to_string(w + 1);
    const std::string name = w < v.worker_names.size() ? v.worker_names[w] : "Worker " + std::to_string(w + 1);
    ids.push_back(id);
    names.push_back(name);
    entries.push_back({id, name, {detail::alias_for(name)}});
  }

  // Account books: round-robin over a shuffled account list.
  std::vector<std::string> shuffled = v.accounts;
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  std::vector<std::vector<std::string>> books(cfg.workers);
  for (std::size_t i = 0; i < std::min(shuffled.size(), cfg.workers * cfg.book_size); ++i)
    books[i % std::max<std::size_t>(cfg.workers, 1)].push_back(shuffled[i]);
  for (auto& b : books)
    if (b.empty()) b.push_back(rng.pick(v.accounts));

  std::vector<InteractionEvent> events;
  auto emit = [&](const std::string& who, const std::string& app, Instant ts, std::string title, std::string text,
                  std::string action, double dwell, Attributes attrs = {}) {
    InteractionEvent e;
    e.participant_id = who;
    e.app = app;
    e.ts = ts;
    e.screen_title = std::move(title);
    e.screen_text = std::move(text);
    e.action = std::move(action);
    e.dwell = dwell;
    e.ui_attributes = std::move(attrs);
    events.push_back(std::move(e));
  };

  // Routine work and broadcast noise.
  std::vector<std::string> featured(cfg.days);
  for (auto& f : featured) f = rng.pick(v.accounts);
  for (std::size_t day = 0; day < cfg.days; ++day) {
    for (std::size_t w = 0; w < cfg.workers; ++w) {
      const auto& who = ids[w];
      for (std::size_t n = 0; n < cfg.noise_events_per_day; ++n) {
        const Instant ts = at(day, rng.range(8 * H, 17 * H));
        const double r = rng.unit();
        if (r < 0.25) {
          const auto& topic = rng.pick(v.internal_topics);
          emit(who, apps.mail, ts, "Re: " + topic, "Thread about " + topic + ". Next steps noted.", "read",
               static_cast<double>(rng.range(20, 120)));
        } else if (r < 0.50) {
          const auto& acct = rng.pick(books[w]);
          emit(who, apps.crm, ts, "Account: " + acct,
               "Account " + acct + " overview. Renewal on schedule. Open cases: " + std::to_string(rng.range(0, 4)) +
                   ". Health: green.",
               "view", static_cast<double>(rng.range(30, 180)), {{"account", acct}});
        } else if (r < 0.70) {
          const auto& acct = rng.pick(books[w]);
          const auto& issue = rng.pick(v.support_issues);
          emit(who, apps.support, ts, "Case " + std::to_string(100 + rng.below(40)) + ": " + issue,
               "Customer " + acct + " reported " + issue + ". Status: in progress.", "view",
               static_cast<double>(rng.range(30, 150)), {{"account", acct}});
        } else if (r < 0.85) {
          const auto& ch = rng.pick(v.channels);
          emit(who, apps.chat, ts, "#" + ch, rng.pick(v.chatter), "read", static_cast<double>(rng.range(10, 60)));
        } else if (r < 0.95) {
          const auto& page = rng.pick(v.wiki_pages);
          emit(who, apps.wiki, ts, page, "Internal page: " + page + ".", "view",
               static_cast<double>(rng.range(20, 90)));
        } else {
          emit(who, apps.meetings, ts, "Weekly sync", "Recurring meeting. Agenda: updates from each member.", "join",
               static_cast<double>(rng.range(600, 1800)));
        }
      }
      // Broadcast items loaded with sales vocabulary that nobody dwells on.
      for (std::size_t n = 0; n < cfg.decoys_per_day; ++n) {
        const auto& campaign = v.campaigns[n % v.campaigns.size()];
        const auto& acct = featured[day];
        const auto& mod = rng.pick(v.modules);
        const auto& comp = rng.pick(v.competitors);
        emit(who, apps.newsletter, at(day, rng.range(8 * H, 17 * H)), "Digest: " + acct + " " + campaign,
             "Marketing digest. New business opportunities: " + acct + " could expand " + mod + ". Competitor " +
                 comp + " pricing and license offers are trending. Contract review and pricing interest rising.",
             "view", static_cast<double>(rng.range(3, 12)),
             {{"account", acct}, {"module", mod}, {"competitor", comp}});
      }
    }
  }

  // Planted opportunities: distinct (worker, filing day) slots.
  const std::size_t span = cfg.narrative_span_days;
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (filing day, worker)
  for (std::size_t day = span - 1; day < cfg.days; ++day)
    for (std::size_t w = 0; w < cfg.workers; ++w) slots.emplace_back(day, w);
  for (std::size_t i = 0; i < cfg.planted; ++i) std::swap(slots[i], slots[i + rng.below(slots.size() - i)]);
  slots.resize(cfg.planted);
  std::sort(slots.begin(), slots.end());

  std::map<std::pair<std::size_t, std::string>, std::int64_t> last_used;  // (worker, account) → filing day
  struct Planted {
    std::string participant;
    Instant ts;
    std::string account, description;
    Attributes attributes;
  };
  std::vector<Planted> planted;
  for (const auto& [fday, w] : slots) {
    const auto& who = ids[w];
    // The book account idle the longest.
    std::string acct;
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const auto& a : books[w]) {
      auto it = last_used.find({w, a});
      const std::int64_t used = it == last_used.end() ? -1000 : it->second;
      if (used < best) best = used, acct = a;
    }
    last_used[{w, acct}] = static_cast<std::int64_t>(fday);
    const auto& mod = rng.pick(v.modules);
    const bool has_comp = rng.chance(cfg.competitor_probability);
    const std::string comp = has_comp ? rng.pick(v.competitors) : std::string();
    const auto& contact = rng.pick(v.contacts);
    std::optional<std::size_t> collab;
    if (cfg.workers > 1 && rng.chance(cfg.collaborator_probability)) {
      std::size_t c = rng.below(cfg.workers - 1);
      collab = c >= w ? c + 1 : c;
    }
    const std::size_t day0 = fday + 1 - span;
    auto when = [&](std::size_t r, std::int64_t lo_h, std::int64_t hi_h) { return at(day0 + r, rng.range(lo_h * H, hi_h * H)); };

    Attributes acct_attr{{"account", acct}};
    Attributes mod_attr{{"account", acct}, {"module", mod}};
    Attributes full_attr = mod_attr;
    if (has_comp) full_attr.emplace_back("competitor", comp);

    const std::string report = "License report: " + acct;
    const std::string report_text = "Account: " + acct + ". " + mod + ": no license. Active users on workarounds: " +
                                    std::to_string(rng.range(2, 9)) + ". License gaps flagged.";
    const std::string contract = acct + " MSA v2.1";
    const std::string thread = "#deal-desk " + acct;
    const std::string thread_text =
        has_comp ? "Heads up on " + acct + ": competitor " + comp + " has been pitching their " + mod +
                       " alternative. Pricing pressure likely."
                 : "Heads up on " + acct + ": they asked about " + mod + " on the last call. Pricing questions coming.";

    emit(who, apps.mail, when(0, 9, 11), "Re: " + acct + " platform limitations",
         "From: " + contact + " (" + acct + "). We have been working around a limitation with " + mod +
             " for some time and wanted to understand whether there is a better path forward.",
         "read", static_cast<double>(rng.range(90, 150)), {{"account", acct}, {"contact", contact}});
    emit(who, apps.reports, when(0, 13, 16), report, report_text, "ran_report", static_cast<double>(rng.range(120, 240)),
         mod_attr);
    if (span > 1)
      emit(who, apps.reports, when(1, 9, 11), report, report_text, "view", static_cast<double>(rng.range(60, 120)),
           mod_attr);
    for (std::size_t r = (span > 1 ? 1 : 0); r < span; ++r) {
      const double base = 240.0 * static_cast<double>(std::max<std::size_t>(r, 1));
      const std::int64_t first = rng.range(9 * H, 12 * H);
      const std::int64_t second = first + rng.range(2 * H, 4 * H);
      for (std::int64_t t : {first, second})
        emit(who, apps.contracts, at(day0 + r, t), contract,
             contract + ". Contract review: sections 7 and 8 viewed. Renewal and expansion terms.", "view",
             base + static_cast<double>(rng.range(0, 120)), acct_attr);
    }
    const std::size_t chat_day = span >= 2 ? span - 2 : 0;
    const Instant chat_ts = when(chat_day, 10, 15);
    if (collab) {
      emit(ids[*collab], apps.chat, chat_ts - Seconds{rng.range(60, 600)}, thread, thread_text, "send",
           static_cast<double>(rng.range(40, 90)), full_attr);
      emit(ids[*collab], apps.reports, when(chat_day, 9, 10), report, report_text, "view",
           static_cast<double>(rng.range(60, 150)), mod_attr);
    }
    emit(who, apps.chat, chat_ts, thread, thread_text, "read", static_cast<double>(rng.range(60, 120)), full_attr);
    emit(who, apps.chat, chat_ts + Seconds{rng.range(2 * H, 3 * H)}, thread,
         "Thanks. Checking pricing options for " + acct + " before the next call.", "send",
         static_cast<double>(rng.range(60, 120)), full_attr);
    const std::string price_text = "Search: " + mod + " pricing tier 2 for " + acct +
                                   (has_comp ? " compared with " + comp : std::string()) +
                                   ". Result: list price range by seat count.";
    for (int k = 0; k < 2; ++k)
      emit(who, apps.pricing, when(span - 1, 10 + 3 * k, 12 + 3 * k), "Pricing: " + mod + " tier 2", price_text,
           "search", static_cast<double>(rng.range(80, 140)), full_attr);

    // The filing act, after the routine work of the filing day.
    const Instant file_ts = at(fday, 17 * H + rng.range(15 * 60, 45 * 60));
    const std::string screen = "New Opportunity: " + acct;
    std::string description = mod + " expansion for " + acct;
    if (has_comp) description += "; competitor " + comp + " is active";
    emit(who, apps.crm, file_ts - Seconds{480}, screen, "Opportunity form: account " + acct + ".", "open", 60,
         acct_attr);
    emit(who, apps.crm, file_ts - Seconds{300}, screen, description, "write", 200, full_attr);
    emit(who, apps.crm, file_ts, screen, description, std::string(kFilingAction), 5, full_attr);
    planted.push_back({who, file_ts, acct, description, full_attr});
  }

  Corpus corpus{EventLog(std::move(events)), {}, Roster(std::move(entries), {})};
  for (std::size_t i = 0; i < corpus.log.size(); ++i) {
    if (corpus.log[i].action != kFilingAction) continue;
    corpus.filings.push_back(filing_from_event(corpus.log[i], i));
  }
  return corpus;
}

inline std::string ground_truth_jsonl(const std::vector<GroundTruthFiling>& filings) {
  std::string out;
  for (const auto& f : filings) {
    Json j{{"instance_id", f.instance_id},
           {"participant_id", f.participant_id},
           {"ts", format_utc(f.ts)},
           {"account", f.account},
           {"description", f.description},
           {"attributes", attributes_to_json(f.attributes)}};
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching and metrics
// ---------------------------------------------------------------------------

struct MatchParams {
  double sim_threshold = 0.7;
  double borderline_band = 0.05;
};

struct MatchScores {
  double cosine = 0.0;
  bool attributes_match = false;
  bool matched = false;
  bool borderline = false;
};

/// Match iff description cosine ≥ threshold or every filing attribute is
/// present (normalized equality) among the proposal's attributes.
inline MatchScores match_proposal(const Proposal& p, const GroundTruthFiling& f, const Embedder& embedder,
                                  const MatchParams& params = {}) {
  MatchScores s;
  s.cosine = cosine(embedder.embed(p.description), embedder.embed(f.description));
  std::set<std::pair<std::string, std::string>> have;
  for (const auto& [k, v] : p.attributes) have.emplace(normalize_space_lower(k), normalize_space_lower(v));
  s.attributes_match = !f.attributes.empty();
  for (const auto& [k, v] : f.attributes)
    s.attributes_match = s.attributes_match && have.count({normalize_space_lower(k), normalize_space_lower(v)});
  s.matched = p.description == f.description || s.cosine >= params.sim_threshold || s.attributes_match;
  s.borderline = std::abs(s.cosine - params.sim_threshold) <= params.borderline_band;
  return s;
}

struct InstanceRecord {
  std::string instance_id;
  std::string participant_id;
  bool positive = false;
  std::size_t proposals = 0;
  bool matched = false;           // positive with at least one matching proposal
  std::size_t false_proposals = 0;  // proposals matching no filing in the corpus
  double best_cosine = 0.0;
  bool borderline = false;
  std::size_t input_events = 0;
  std::string error;
};

struct MetricsReport {
  std::size_t true_leads = 0;
  std::size_t missed_leads = 0;
  std::size_t false_leads = 0;
  double tlr = 0.0;
  double mlr = 0.0;
  double flr = 0.0;
  std::size_t borderline = 0;
  std::vector<InstanceRecord> records;
};

/// Ratios from counts. FLR = false / (true + false), 0 when nothing was proposed.
inline MetricsReport metrics_from_counts(std::size_t true_leads, std::size_t missed_leads, std::size_t false_leads) {
  const std::size_t positives = true_leads + missed_leads;
  if (positives == 0) throw ValidationError("positives", "TLR/MLR undefined without positive instances");
  MetricsReport r;
  r.true_leads = true_leads;
  r.missed_leads = missed_leads;
  r.false_leads = false_leads;
  r.tlr = static_cast<double>(true_leads) / static_cast<double>(positives);
  r.mlr = static_cast<double>(missed_leads) / static_cast<double>(positives);
  const std::size_t surfaced = true_leads + false_leads;
  r.flr = surfaced == 0 ? 0.0 : static_cast<double>(false_leads) / static_cast<double>(surfaced);
  return r;
}

inline MetricsReport compute_metrics(std::vector<InstanceRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) { return a.instance_id < b.instance_id; });
  std::size_t t = 0, m = 0, f = 0, borderline = 0;
  for (const auto& r : records) {
    if (r.positive) (r.matched ? t : m) += 1;
    f += r.false_proposals;
    borderline += r.borderline ? 1 : 0;
  }
  auto report = metrics_from_counts(t, m, f);
  report.borderline = borderline;
  report.records = std::move(records);
  return report;
}

using BenchmarkSystem = std::function<std::vector<Proposal>(const BenchmarkInstance&)>;

inline MetricsReport run_benchmark(const std::vector<BenchmarkInstance>& instances, const BenchmarkSystem& system,
                                   const std::vector<GroundTruthFiling>& all_filings, const Embedder& embedder,
                                   const MatchParams& params = {}) {
  std::vector<InstanceRecord> records;
  for (const auto& inst : instances) {
    InstanceRecord rec;
    rec.instance_id = inst.instance_id;
    rec.participant_id = inst.participant_id;
    rec.positive = inst.positive();
    rec.input_events = inst.events.size();
    std::vector<Proposal> proposals;
    try {
      proposals = system(inst);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    rec.proposals = proposals.size();
    for (const auto& p : proposals) {
      if (inst.label) {
        const auto s = match_proposal(p, *inst.label, embedder, params);
        rec.best_cosine = std::max(rec.best_cosine, s.cosine);
        rec.borderline = rec.borderline || s.borderline;
        rec.matched = rec.matched || s.matched;
      }
      bool any = false;
      for (const auto& f : all_filings)
        if (match_proposal(p, f, embedder, params).matched) {
          any = true;
          break;
        }
      if (!any) ++rec.false_proposals;
    }
    records.push_back(std::move(rec));
  }
  return compute_metrics(std::move(records));
}

inline Json to_json(const MetricsReport& r, std::string_view system = {}) {
  Json recs = Json::array();
  for (const auto& x : r.records) {
    Json j{{"instance_id", x.instance_id},     {"participant_id", x.participant_id},
           {"positive", x.positive},           {"proposals", x.proposals},
           {"matched", x.matched},             {"false_proposals", x.false_proposals},
           {"best_cosine", x.best_cosine},     {"borderline", x.borderline},
           {"input_events", x.input_events}};
    if (!x.error.empty()) j["error"] = x.error;
    recs.push_back(std::move(j));
  }
  Json j = Json::object();
  if (!system.empty()) j["system"] = std::string(system);
  j["true_leads"] = r.true_leads;
  j["missed_leads"] = r.missed_leads;
  j["false_leads"] = r.false_leads;
  j["tlr"] = r.tlr;
  j["mlr"] = r.mlr;
  j["flr"] = r.flr;
  j["borderline"] = r.borderline;
  j["records"] = std::move(recs);
  return j;
}

// ---------------------------------------------------------------------------
// Systems under test
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultBenchmarkQuery =
    "{subject}: which accounts show signs of a new opportunity, such as license gaps, workarounds for "
    "limitations, competitor activity, contract review or pricing interest?";

struct PipelineSystemConfig {
  EngineOptions engine;
  DomainRules rules = DomainRules::defaults();
  Roster roster;
  std::string query_template = std::string(kDefaultBenchmarkQuery);
  TemplateParams synthesis;
  std::shared_ptr<const SelectorModel> model;
};

inline std::string benchmark_query(const std::string& tmpl, const Roster& roster, const std::string& participant) {
  std::string subject = participant;
  if (const auto* p = roster.find(participant); p && !p->aliases.empty()) subject = p->aliases.front();
  std::string q = tmpl;
  if (auto pos = q.find("{subject}"); pos != std::string::npos) q.replace(pos, 9, subject);
  return q;
}

/// The full pipeline over each instance's input window only.
inline BenchmarkSystem make_pipeline_system(PipelineSystemConfig cfg) {
  auto shared = std::make_shared<const PipelineSystemConfig>(std::move(cfg));
  auto synth = std::make_shared<const TemplateSynthesizer>(shared->synthesis);
  return [shared, synth](const BenchmarkInstance& inst) {
    Roster roster = shared->roster.empty() ? Roster::from_ids({inst.participant_id}) : shared->roster;
    Engine engine(EventLog(inst.events), shared->rules, roster, shared->engine);
    const auto q = benchmark_query(shared->query_template, roster, inst.participant_id);
    return engine.run_query(q, inst.as_of, shared->model.get(), *synth).result.proposals;
  };
}

/// Same pipeline with the attention factor held constant.
inline BenchmarkSystem make_content_only_system(PipelineSystemConfig cfg) {
  cfg.engine.retrieval.content_only = true;
  return make_pipeline_system(std::move(cfg));
}

inline BenchmarkSystem make_oracle_system() {
  return [](const BenchmarkInstance& inst) {
    std::vector<Proposal> out;
    if (inst.label) out.push_back({inst.label->account, inst.label->description, inst.label->attributes, {}});
    return out;
  };
}

inline BenchmarkSystem make_null_system() {
  return [](const BenchmarkInstance&) { return std::vector<Proposal>{}; };
}

}  // namespace xsynth
