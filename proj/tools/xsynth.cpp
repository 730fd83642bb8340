// xsynth command-line entry point.
//
// Exit codes: 0 success, 1 internal failure, 2 usage or input error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "xsynth/http_synthesizer.hpp"
#include "xsynth/xsynth.hpp"

namespace fs = std::filesystem;
using namespace xsynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string as_of;
  std::optional<std::size_t> k;
  std::string store;
  bool json = false;
};

EngineConfig load_config(const GlobalOptions& g) {
  EngineConfig cfg;
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw ConfigError("config file not found: " + g.config);
    cfg = load_engine_config(g.config);
  }
  if (g.seed) cfg.set_seed(*g.seed);
  if (g.k) cfg.retrieval.k = *g.k;
  if (!g.store.empty()) cfg.paths.store = g.store;
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot read ") + what + ": " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

EventLog load_store(const EngineConfig& cfg) {
  if (!fs::exists(cfg.paths.store)) throw InputError("no ingested log: store " + cfg.paths.store + " does not exist");
  std::ifstream in(cfg.paths.store);
  auto result = ingest(in);
  if (result.log.empty()) throw InputError("no ingested log: store " + cfg.paths.store + " is empty");
  return std::move(result.log);
}

Instant resolve_as_of(const std::string& text, const EventLog& log) {
  if (!text.empty()) {
    Instant t;
    if (!try_parse_utc(text, t)) throw ParseError("as-of", "expected YYYY-MM-DDTHH:MM:SSZ, got '" + text + "'");
    return t;
  }
  return *log.last_ts() + Seconds{1};
}

std::optional<SelectorModel> load_model(const EngineConfig& cfg) {
  if (cfg.paths.model.empty() || !fs::exists(cfg.paths.model)) return std::nullopt;
  return SelectorModel::from_json(read_json_file(cfg.paths.model, "model"));
}

std::unique_ptr<Synthesizer> make_synthesizer(const EngineConfig& cfg) {
  if (cfg.synthesizer.kind == "http")
    return std::make_unique<HttpSynthesizer>(
        HttpSynthesizerConfig{cfg.synthesizer.url, cfg.synthesizer.timeout_s, cfg.synthesizer.retries});
  return std::make_unique<TemplateSynthesizer>(cfg.synthesizer.template_params);
}

std::string fixed(double x, int digits = 3) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << x;
  return ss.str();
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

int cmd_ingest(const GlobalOptions& g, const std::string& input, bool replace) {
  const auto cfg = load_config(g);
  std::ifstream in(input);
  if (!in) throw InputError("cannot read input file: " + input);
  auto fresh = ingest(in);

  std::vector<InteractionEvent> events;
  if (!replace && fs::exists(cfg.paths.store)) {
    std::ifstream existing(cfg.paths.store);
    events = ingest(existing).log.events();
  }
  const auto& added = fresh.log.events();
  events.insert(events.end(), added.begin(), added.end());
  const EventLog merged(std::move(events));
  write_file(cfg.paths.store, merged.serialize());

  if (g.json) {
    Json rejected = Json::array();
    for (const auto& r : fresh.rejected) rejected.push_back(Json{{"line", r.line}, {"reason", r.reason}});
    print_json(Json{{"accepted", fresh.accepted},
                    {"rejected", fresh.rejected.size()},
                    {"rejections", rejected},
                    {"store", cfg.paths.store},
                    {"store_events", merged.size()}});
  } else {
    std::cout << "accepted=" << fresh.accepted << " rejected=" << fresh.rejected.size() << "\n";
    for (const auto& r : fresh.rejected) std::cerr << "line " << r.line << ": " << r.reason << "\n";
    std::cout << "store " << cfg.paths.store << " holds " << merged.size() << " events\n";
  }
  return kExitOk;
}

int cmd_dts(const GlobalOptions& g, const std::string& participant) {
  const auto cfg = load_config(g);
  const auto log = load_store(cfg);
  if (!log.has_participant(participant)) throw NotFoundError("participant '" + participant + "' has no events");
  const auto rules = cfg.domain_rules();
  const Catalog catalog(log, rules, cfg.normalizer());
  const auto as_of = resolve_as_of(g.as_of, log);
  const auto dts = assemble_dts(log, catalog, participant, as_of, cfg.dts);
  auto j = to_json(dts, catalog.domains());
  j["participant_id"] = participant;
  j["as_of"] = format_utc(as_of);
  print_json(j);
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const std::string& dataset_path, std::string out, std::string curve,
              std::optional<std::size_t> epochs) {
  auto cfg = load_config(g);
  if (epochs) cfg.train.epochs = *epochs;
  if (out.empty()) out = cfg.paths.model;
  if (out.empty()) throw ConfigError("no model output path: pass --out or set paths.model");
  if (curve.empty()) curve = fs::path(out).replace_extension(".loss.json").string();

  const HashingEmbedder embedder(cfg.d_q);
  std::vector<TrainingExample> data;
  if (dataset_path.empty()) {
    const auto d = cfg.domain_rules().size();
    if (d != engineering_rules().size())
      throw ConfigError("built-in training set assumes " + std::to_string(engineering_rules().size()) +
                        " domains; pass --dataset for " + std::to_string(d));
    data = harness_dataset(cfg.harness_params());
  } else {
    std::ifstream in(dataset_path);
    if (!in) throw InputError("cannot read dataset: " + dataset_path);
    data = dataset_from_jsonl(in);
  }
  if (data.empty()) throw ValidationError("dataset", "no training examples");

  const auto feature_len = data.front().dts_features.size();
  if (feature_len < kGlobalSummarySize || (feature_len - kGlobalSummarySize) % 5 != 0)
    throw ValidationError("dts_features", "length " + std::to_string(feature_len) + " is not 5d+6");
  SelectorDims dims{cfg.d_q, (feature_len - kGlobalSummarySize) / 5, cfg.hidden1, cfg.hidden2};
  for (const auto& ex : data)
    if (ex.dts_features.size() != feature_len) throw ValidationError("dts_features", "inconsistent lengths");

  const auto result =
      train(SelectorModel::initialized(dims, cfg.train.seed), std::span<const TrainingExample>(data), cfg.train, embedder);
  write_file(out, result.model.to_json().dump() + "\n");
  write_file(curve, Json{{"loss_curve", result.loss_curve}}.dump() + "\n");

  const double final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
  if (g.json) {
    print_json(Json{{"model", out},
                    {"loss_curve_file", curve},
                    {"examples", data.size()},
                    {"epochs", cfg.train.epochs},
                    {"final_loss", final_loss},
                    {"fingerprint", result.model.fingerprint()}});
  } else {
    std::cout << "trained on " << data.size() << " examples for " << cfg.train.epochs << " epochs, final loss "
              << fixed(final_loss, 4) << "\n"
              << "model " << out << " (fingerprint " << std::hex << result.model.fingerprint() << std::dec << ")\n"
              << "loss curve " << curve << "\n";
  }
  return kExitOk;
}

void print_run(const QueryRun& run) {
  std::cout << run.result.response_text << "\n\n";
  if (run.trace.subjects.empty()) std::cout << "no subjects in scope\n";
  for (const auto& u : run.trace.unresolved) std::cout << "unresolved subject: " << u << "\n";
  std::cout << std::left << std::setw(14) << "participant" << std::setw(14) << "filter" << std::setw(8) << "weight"
            << std::setw(10) << "attention" << std::setw(9) << "content"
            << "artifact\n";
  for (const auto& p : run.trace.participants) {
    for (const auto& e : p.evidence.items)
      std::cout << std::left << std::setw(14) << p.participant_id << std::setw(14) << filter_name(e.dominant_filter)
                << std::setw(8) << fixed(e.weight) << std::setw(10) << fixed(e.attention) << std::setw(9)
                << fixed(e.content) << e.title << "\n";
  }
}

std::optional<int> prompt_satisfaction() {
  std::string line;
  while (true) {
    std::cout << "satisfied? [1 = yes, 0 = no]: " << std::flush;
    if (!std::getline(std::cin, line)) return std::nullopt;
    const auto t = normalize_space_lower(line);
    if (t == "1" || t == "0") return t == "1" ? 1 : 0;
    std::cout << "please answer 0 or 1\n";
  }
}

int cmd_query(const GlobalOptions& g, std::string query, bool interactive) {
  const auto cfg = load_config(g);
  auto log = load_store(cfg);
  const auto as_of = resolve_as_of(g.as_of, log);
  auto embedder = std::make_shared<const HashingEmbedder>(cfg.d_q);
  const Engine engine(std::move(log), cfg.domain_rules(), cfg.roster(), cfg.engine_options(), cfg.normalizer(),
                      embedder);
  const auto synth = make_synthesizer(cfg);
  ModelStore store;
  if (auto m = load_model(cfg)) store.reset(std::move(*m));

  for (std::size_t n = 1;; ++n) {
    const auto model = store.snapshot();
    const auto run = engine.run_query(query, as_of, model.get(), *synth);
    if (g.json)
      print_json(Json{{"result", to_json(run.result)}, {"trace", to_json(run.trace)}});
    else
      print_run(run);
    if (!interactive) break;

    const auto s = prompt_satisfaction();
    if (!s) break;
    FeedbackRecord record;
    record.query_id = "q" + std::to_string(n);
    record.satisfaction = *s;
    if (*s == 0) record.attribution = attribute_failure(engine, run.trace, run.result);
    const auto outcome = apply_feedback(record, run.trace, store, *embedder, cfg.feedback, nullptr, &std::cout);
    if (outcome.updated && !cfg.paths.model.empty())
      write_file(cfg.paths.model, store.snapshot()->to_json().dump() + "\n");

    std::cout << "query> " << std::flush;
    if (!std::getline(std::cin, query) || query.find_first_not_of(" \t\r") == std::string::npos) break;
  }
  return kExitOk;
}

int cmd_bench_generate(const GlobalOptions& g, const std::string& out_dir) {
  const auto cfg = load_config(g);
  const auto corpus = generate_corpus(cfg.benchmark.generator);
  const fs::path dir(out_dir);
  write_file((dir / "corpus.jsonl").string(), corpus.log.serialize());
  write_file((dir / "ground_truth.jsonl").string(), ground_truth_jsonl(corpus.filings));
  write_file((dir / "roster.json").string(), corpus.roster.to_json().dump(2) + "\n");
  if (g.json)
    print_json(Json{{"seed", cfg.seed},
                    {"events", corpus.log.size()},
                    {"filings", corpus.filings.size()},
                    {"dir", dir.string()}});
  else
    std::cout << "generated " << corpus.log.size() << " events, " << corpus.filings.size() << " planted filings in "
              << dir.string() << " (seed " << cfg.seed << ")\n";
  return kExitOk;
}

int cmd_bench_run(const GlobalOptions& g, const std::string& system, const std::string& corpus_path,
                  const std::string& roster_path, const std::string& report_path) {
  const auto cfg = load_config(g);
  EventLog log;
  Roster roster;
  if (corpus_path.empty()) {
    auto corpus = generate_corpus(cfg.benchmark.generator);
    log = std::move(corpus.log);
    roster = std::move(corpus.roster);
  } else {
    std::ifstream in(corpus_path);
    if (!in) throw InputError("cannot read corpus: " + corpus_path);
    auto result = ingest(in);
    if (!result.rejected.empty())
      throw InputError("corpus " + corpus_path + " has " + std::to_string(result.rejected.size()) + " bad lines");
    log = std::move(result.log);
    roster = roster_path.empty() ? Roster::from_ids(log.participants())
                                 : Roster::from_json(read_json_file(roster_path, "roster"));
  }

  const auto instances = extract_instances(log, default_filing_predicate(), cfg.benchmark.extract);
  std::vector<GroundTruthFiling> filings;
  for (const auto& inst : instances)
    if (inst.label) filings.push_back(*inst.label);

  const HashingEmbedder embedder(cfg.d_q);
  PipelineSystemConfig pc;
  pc.engine = cfg.engine_options();
  pc.rules = cfg.domain_rules();
  pc.roster = roster;
  pc.query_template = cfg.benchmark.query_template;
  pc.synthesis = cfg.synthesizer.template_params;

  std::vector<std::pair<std::string, BenchmarkSystem>> systems;
  if (system == "xsynth" || system == "both") {
    auto model = load_model(cfg);
    if (!model) {
      if (!g.json) std::cerr << "no model at '" << cfg.paths.model << "', training the built-in selector\n";
      model = train_harness_model(cfg.harness_params(), &embedder).model;
    }
    pc.model = std::make_shared<const SelectorModel>(std::move(*model));
    systems.emplace_back("xsynth", make_pipeline_system(pc));
  }
  if (system == "baseline" || system == "both") systems.emplace_back("baseline", make_content_only_system(pc));

  Json reports = Json::array();
  std::vector<MetricsReport> results;
  for (const auto& [name, fn] : systems) {
    results.push_back(run_benchmark(instances, fn, filings, embedder, cfg.benchmark.match));
    reports.push_back(to_json(results.back(), name));
  }
  Json report = reports.size() == 1 ? reports.front() : Json{{"systems", reports}};
  report["seed"] = cfg.seed;
  report["instances"] = instances.size();
  if (results.size() == 2 && results[1].tlr > 0.0) report["tlr_lift"] = results[0].tlr / results[1].tlr;

  if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
  if (g.json) {
    print_json(report);
  } else {
    std::cout << instances.size() << " instances, " << filings.size() << " positives\n";
    std::cout << std::left << std::setw(10) << "system" << std::setw(6) << "true" << std::setw(8) << "missed"
              << std::setw(7) << "false" << std::setw(8) << "TLR" << std::setw(8) << "MLR"
              << "FLR\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      std::cout << std::left << std::setw(10) << systems[i].first << std::setw(6) << r.true_leads << std::setw(8)
                << r.missed_leads << std::setw(7) << r.false_leads << std::setw(8) << fixed(r.tlr) << std::setw(8)
                << fixed(r.mlr) << fixed(r.flr) << "\n";
    }
    if (!report_path.empty()) std::cout << "report " << report_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xsynth: attention-aware evidence retrieval over interaction logs"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Engine config (JSON)");
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--as-of", g.as_of, "Reference time, YYYY-MM-DDTHH:MM:SSZ (default: just after the last event)");
  app.add_option("--k", g.k, "Evidence items per participant")->check(CLI::PositiveNumber);
  app.add_option("--store", g.store, "Event store file (overrides paths.store)");
  app.add_flag("--json", g.json, "Machine-readable output on stdout");

  std::function<int()> action;

  auto* ingest_cmd = app.add_subcommand("ingest", "Ingest a JSONL event file into the store");
  std::string ingest_input;
  bool replace = false;
  ingest_cmd->add_option("file", ingest_input, "JSONL events")->required();
  ingest_cmd->add_flag("--replace", replace, "Replace the store instead of appending");
  ingest_cmd->callback([&] { action = [&] { return cmd_ingest(g, ingest_input, replace); }; });

  auto* dts_cmd = app.add_subcommand("dts", "Print a participant's digital twin signature");
  std::string dts_participant;
  dts_cmd->add_option("participant", dts_participant, "Participant id")->required();
  dts_cmd->callback([&] { action = [&] { return cmd_dts(g, dts_participant); }; });

  auto* train_cmd = app.add_subcommand("train", "Train the modality selector");
  std::string dataset, model_out, curve_out;
  std::optional<std::size_t> epochs;
  train_cmd->add_option("--dataset", dataset, "Labelled JSONL (query, dts_features, target); default: built-in set");
  train_cmd->add_option("--out", model_out, "Model file (default: paths.model)");
  train_cmd->add_option("--curve", curve_out, "Loss curve file (default: <out>.loss.json)");
  train_cmd->add_option("--epochs", epochs, "Override the configured epochs")->check(CLI::PositiveNumber);
  train_cmd->callback([&] { action = [&] { return cmd_train(g, dataset, model_out, curve_out, epochs); }; });

  auto* query_cmd = app.add_subcommand("query", "Answer a query over the store");
  std::string query_text;
  bool interactive = false;
  query_cmd->add_option("text", query_text, "Query text")->required();
  query_cmd->add_flag("--interactive", interactive, "Ask for satisfaction after each answer and learn from it");
  query_cmd->callback([&] { action = [&] { return cmd_query(g, query_text, interactive); }; });

  auto* bench_cmd = app.add_subcommand("bench", "Benchmark corpus generation and evaluation");
  bench_cmd->require_subcommand(1);
  auto* gen_cmd = bench_cmd->add_subcommand("generate", "Write a seeded synthetic corpus");
  std::string gen_out = ".";
  gen_cmd->add_option("--out", gen_out, "Output directory");
  gen_cmd->callback([&] { action = [&] { return cmd_bench_generate(g, gen_out); }; });

  auto* run_cmd = bench_cmd->add_subcommand("run", "Evaluate systems on a corpus");
  std::string system = "both", corpus_path, roster_path, report_path;
  run_cmd->add_option("--system", system, "xsynth, baseline or both")
      ->check(CLI::IsMember({"xsynth", "baseline", "both"}));
  run_cmd->add_option("--corpus", corpus_path, "Corpus JSONL (default: generate from config)");
  run_cmd->add_option("--roster", roster_path, "Roster JSON for the corpus");
  run_cmd->add_option("--report", report_path, "Write the metrics report here");
  run_cmd->callback([&] { action = [&] { return cmd_bench_run(g, system, corpus_path, roster_path, report_path); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
