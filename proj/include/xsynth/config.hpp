#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "xsynth/labeling.hpp"

namespace xsynth {

struct SynthesizerConfig {
  std::string kind = "template";  // template | http
  TemplateParams template_params;
  std::string url;
  double timeout_s = 30.0;
  std::size_t retries = 2;
};

struct BenchmarkDefaults {
  GeneratorConfig generator;
  ExtractParams extract;
  MatchParams match;
  std::string query_template = std::string(kDefaultBenchmarkQuery);
  HarnessParams harness;
};

/// Every tunable constant, with defaults. Relative paths resolve against
/// the directory of the config file.
struct EngineConfig {
  struct Paths {
    std::string store = "xsynth-store.jsonl";
    std::string roster;
    std::string domain_rules;
    std::string model;
    std::string cue_lexicon;
  } paths;
  std::vector<std::string> title_suffixes;
  std::size_t d_q = HashingEmbedder::kDefaultDim;
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 64;
  DtsConfig dts;
  RetrievalParams retrieval;
  SelectorMode selector_mode = SelectorMode::Hybrid;
  TrainParams train{7, 0.05, 60, 16};
  FeedbackParams feedback;
  SynthesizerConfig synthesizer;
  BenchmarkDefaults benchmark;
  std::uint64_t seed = 7;

  void validate() const {
    if (d_q == 0 || hidden1 == 0 || hidden2 == 0) throw ConfigError("dimensions must be positive");
    if (dts.short_days <= 0 || dts.long_days <= 0 || dts.lookback_days <= 0)
      throw ConfigError("window lengths must be positive");
    if (retrieval.k == 0) throw ConfigError("retrieval.k must be >= 1");
    if (retrieval.alpha < 0.0 || retrieval.alpha > 1.0) throw ConfigError("retrieval.alpha must be in [0,1]");
    if (synthesizer.kind != "template" && synthesizer.kind != "http")
      throw ConfigError("synthesizer.kind must be 'template' or 'http'");
    if (synthesizer.kind == "http" && synthesizer.url.empty()) throw ConfigError("synthesizer.url is required for http");
    for (const auto* p : {&paths.roster, &paths.domain_rules, &paths.cue_lexicon})
      if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("referenced file does not exist: " + *p);
  }

  DomainRules domain_rules() const;
  CueLexicon lexicon() const;
  std::optional<Roster> roster() const;
  SelectorDims dims() const { return SelectorDims{d_q, domain_rules().size(), hidden1, hidden2}; }
  TitleNormalizer normalizer() const { return TitleNormalizer(title_suffixes); }

  /// The single source of randomness for every seeded component.
  void set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    benchmark.generator.seed = s;
    benchmark.extract.negatives.seed = s;
  }

  HarnessParams harness_params() const {
    HarnessParams p = benchmark.harness;
    p.seed = seed;
    p.train = train;
    p.hidden1 = hidden1;
    p.hidden2 = hidden2;
    return p;
  }

  EngineOptions engine_options() const {
    EngineOptions o;
    o.dts = dts;
    o.retrieval = retrieval;
    o.mode = selector_mode;
    o.lexicon = lexicon();
    o.d_q = d_q;
    return o;
  }
};

inline Json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot read ") + what + " file: " + path);
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + what + " file " + path + ": " + e.what());
  }
}

inline DomainRules EngineConfig::domain_rules() const {
  return paths.domain_rules.empty() ? DomainRules::defaults()
                                    : DomainRules::from_json(read_json_file(paths.domain_rules, "domain rules"));
}

inline CueLexicon EngineConfig::lexicon() const {
  return paths.cue_lexicon.empty() ? CueLexicon::defaults()
                                   : CueLexicon::from_json(read_json_file(paths.cue_lexicon, "cue lexicon"));
}

inline std::optional<Roster> EngineConfig::roster() const {
  if (paths.roster.empty()) return std::nullopt;
  return Roster::from_json(read_json_file(paths.roster, "roster"));
}

namespace detail {

template <class T>
void take(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

inline const Json& section(const Json& j, const char* key) {
  static const Json kEmpty = Json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kEmpty;
  if (!it->is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return *it;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

inline EngineConfig engine_config_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::section;
  using detail::take;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  EngineConfig c;
  take(j, "seed", c.seed);
  c.set_seed(c.seed);

  const auto& paths = section(j, "paths");
  take(paths, "store", c.paths.store);
  take(paths, "roster", c.paths.roster);
  take(paths, "domain_rules", c.paths.domain_rules);
  take(paths, "model", c.paths.model);
  take(paths, "cue_lexicon", c.paths.cue_lexicon);
  for (auto* p : {&c.paths.store, &c.paths.roster, &c.paths.domain_rules, &c.paths.model, &c.paths.cue_lexicon})
    *p = detail::resolve(base_dir, *p);
  take(j, "title_suffixes", c.title_suffixes);

  const auto& dims = section(j, "dimensions");
  take(dims, "d_q", c.d_q);
  take(dims, "hidden1", c.hidden1);
  take(dims, "hidden2", c.hidden2);

  const auto& w = section(j, "windows");
  take(w, "short_days", c.dts.short_days);
  take(w, "long_days", c.dts.long_days);
  take(w, "lookback_days", c.dts.lookback_days);
  take(w, "session_gap_s", c.dts.session_gap_s);
  take(w, "divergence_epsilon", c.dts.divergence_epsilon);
  take(w, "authoring_actions", c.dts.authoring_actions);

  const auto& f = section(j, "filters");
  auto& fp = c.retrieval.filters;
  take(f, "ownership_threshold", fp.ownership_threshold);
  take(f, "low_attention_threshold", fp.low_attention_threshold);
  take(f, "alternation_gap_s", fp.alternation_gap_s);
  take(f, "sim_threshold", fp.sim_threshold);
  take(f, "sigma_floor", fp.sigma_floor);
  take(f, "lambda_out", fp.lambda_out);

  const auto& r = section(j, "retrieval");
  take(r, "k", c.retrieval.k);
  take(r, "alpha", c.retrieval.alpha);
  take(r, "bm25_k1", c.retrieval.bm25_k1);

  const auto& s = section(j, "selector");
  std::string mode = "hybrid";
  take(s, "mode", mode);
  c.selector_mode = selector_mode_from_name(mode);
  take(s, "learning_rate", c.train.learning_rate);
  take(s, "epochs", c.train.epochs);
  take(s, "batch_size", c.train.batch_size);

  const auto& fb = section(j, "feedback");
  take(fb, "threshold", c.feedback.threshold);
  take(fb, "learning_rate", c.feedback.learning_rate);

  const auto& sy = section(j, "synthesizer");
  take(sy, "kind", c.synthesizer.kind);
  take(sy, "url", c.synthesizer.url);
  take(sy, "timeout_s", c.synthesizer.timeout_s);
  take(sy, "retries", c.synthesizer.retries);
  take(sy, "min_cluster_share", c.synthesizer.template_params.min_cluster_share);
  take(sy, "min_cluster_weight", c.synthesizer.template_params.min_cluster_weight);
  take(sy, "min_items", c.synthesizer.template_params.min_items);
  take(sy, "cluster_key", c.synthesizer.template_params.cluster_key);

  const auto& b = section(j, "benchmark");
  auto& g = c.benchmark.generator;
  g.seed = c.seed;
  take(b, "workers", g.workers);
  take(b, "days", g.days);
  take(b, "start", g.start);
  take(b, "planted", g.planted);
  take(b, "narrative_span_days", g.narrative_span_days);
  take(b, "collaborator_probability", g.collaborator_probability);
  take(b, "noise_events_per_day", g.noise_events_per_day);
  take(b, "decoys_per_day", g.decoys_per_day);
  take(b, "preceding_days", c.benchmark.extract.preceding_days);
  take(b, "negative_ratio", c.benchmark.extract.negatives.ratio);
  take(b, "sim_threshold", c.benchmark.match.sim_threshold);
  take(b, "query_template", c.benchmark.query_template);
  take(b, "harness_security_cohorts", c.benchmark.harness.security_cohorts);
  take(b, "harness_lead_planted", c.benchmark.harness.lead_planted);
  c.set_seed(c.seed);

  c.validate();
  return c;
}

inline EngineConfig load_engine_config(const std::string& path) {
  const auto j = read_json_file(path, "config");
  return engine_config_from_json(j, std::filesystem::path(path).parent_path());
}

inline Json to_json(const EngineConfig& c) {
  return Json{
      {"seed", c.seed},
      {"paths",
       {{"store", c.paths.store},
        {"roster", c.paths.roster},
        {"domain_rules", c.paths.domain_rules},
        {"model", c.paths.model},
        {"cue_lexicon", c.paths.cue_lexicon}}},
      {"title_suffixes", c.title_suffixes},
      {"dimensions", {{"d_q", c.d_q}, {"hidden1", c.hidden1}, {"hidden2", c.hidden2}}},
      {"windows",
       {{"short_days", c.dts.short_days},
        {"long_days", c.dts.long_days},
        {"lookback_days", c.dts.lookback_days},
        {"session_gap_s", c.dts.session_gap_s},
        {"divergence_epsilon", c.dts.divergence_epsilon},
        {"authoring_actions", c.dts.authoring_actions}}},
      {"filters",
       {{"ownership_threshold", c.retrieval.filters.ownership_threshold},
        {"low_attention_threshold", c.retrieval.filters.low_attention_threshold},
        {"alternation_gap_s", c.retrieval.filters.alternation_gap_s},
        {"sim_threshold", c.retrieval.filters.sim_threshold},
        {"sigma_floor", c.retrieval.filters.sigma_floor},
        {"lambda_out", c.retrieval.filters.lambda_out}}},
      {"retrieval", {{"k", c.retrieval.k}, {"alpha", c.retrieval.alpha}, {"bm25_k1", c.retrieval.bm25_k1}}},
      {"selector",
       {{"mode", c.selector_mode == SelectorMode::Hybrid    ? "hybrid"
                 : c.selector_mode == SelectorMode::MlpOnly ? "mlp-only"
                                                            : "rule-only"},
        {"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size}}},
      {"feedback", {{"threshold", c.feedback.threshold}, {"learning_rate", c.feedback.learning_rate}}},
      {"synthesizer",
       {{"kind", c.synthesizer.kind},
        {"url", c.synthesizer.url},
        {"timeout_s", c.synthesizer.timeout_s},
        {"retries", c.synthesizer.retries},
        {"min_cluster_share", c.synthesizer.template_params.min_cluster_share},
        {"min_cluster_weight", c.synthesizer.template_params.min_cluster_weight},
        {"min_items", c.synthesizer.template_params.min_items},
        {"cluster_key", c.synthesizer.template_params.cluster_key}}},
      {"benchmark",
       {{"workers", c.benchmark.generator.workers},
        {"days", c.benchmark.generator.days},
        {"start", c.benchmark.generator.start},
        {"planted", c.benchmark.generator.planted},
        {"narrative_span_days", c.benchmark.generator.narrative_span_days},
        {"collaborator_probability", c.benchmark.generator.collaborator_probability},
        {"noise_events_per_day", c.benchmark.generator.noise_events_per_day},
        {"decoys_per_day", c.benchmark.generator.decoys_per_day},
        {"preceding_days", c.benchmark.extract.preceding_days},
        {"negative_ratio", c.benchmark.extract.negatives.ratio},
        {"sim_threshold", c.benchmark.match.sim_threshold},
        {"query_template", c.benchmark.query_template},
        {"harness_security_cohorts", c.benchmark.harness.security_cohorts},
        {"harness_lead_planted", c.benchmark.harness.lead_planted}}}};
}

}  // namespace xsynth
