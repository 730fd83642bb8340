#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gradient_check.hpp"
#include "test_support.hpp"

using namespace xsynth;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Forward pass written against the flat parameter layout only.
std::vector<double> naive_forward(const SelectorModel& m, const std::vector<double>& x) {
  const auto& d = m.dims();
  const std::size_t sizes[] = {d.input(), d.hidden1, d.hidden2, kFilterCount};
  std::vector<double> a = x;
  std::size_t p = 0;
  for (int layer = 0; layer < 3; ++layer) {
    const std::size_t in = sizes[layer], out = sizes[layer + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t i = 0; i < in; ++i) z[o] += m.parameter(p + o * in + i) * a[i];
    p += in * out;
    for (std::size_t o = 0; o < out; ++o) z[o] += m.parameter(p + o);
    p += out;
    if (layer < 2)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    a = z;
  }
  double mx = a[0];
  for (double v : a) mx = std::max(mx, v);
  double s = 0.0;
  for (double& v : a) s += (v = std::exp(v - mx));
  for (double& v : a) v /= s;
  return a;
}

std::string verdict_name(const RuleVerdict& v) {
  return v.ambiguous() ? "Ambiguous" : std::string(filter_name(*v.filter));
}

DigitalTwinSignature dts_with(std::size_t d, double fill) {
  DigitalTwinSignature dts;
  dts.v_dom.assign(d, fill);
  dts.v_rhythm.assign(d, fill);
  dts.v_base.assign(d, fill);
  dts.v_resp.assign(d, fill);
  dts.v_div.assign(d, fill);
  return dts;
}

}  // namespace

TEST(EmbedderTest, HashingOracle) {
  const HashingEmbedder emb(64);
  const auto v = emb.embed("security review");
  ASSERT_EQ(v.size(), 64u);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i == 27)
      EXPECT_NEAR(v[i], -0.707106781187, 1e-12);
    else if (i == 33)
      EXPECT_NEAR(v[i], 0.707106781187, 1e-12);
    else
      EXPECT_EQ(v[i], 0.0) << i;
  }
  EXPECT_NEAR(dot(v, v), 1.0, 1e-9);
  EXPECT_EQ(emb.embed("Security REVIEW"), v);
}

TEST(EmbedderTest, EmptyTextIsZeroVector) {
  const HashingEmbedder emb(64);
  const auto v = emb.embed("");
  EXPECT_EQ(v, Embedding(64, 0.0));
  EXPECT_THROW(HashingEmbedder(0), ConfigError);
}

TEST(RuleClassifierTest, SpecExamples) {
  const auto team = rule_classify("What did the team ignore last sprint?");
  EXPECT_TRUE(team.ambiguous());
  EXPECT_EQ(team.matched.size(), 2u);
  EXPECT_EQ(verdict_name(rule_classify("Which documents did John keep revisiting?")), "Recurrent");
  const auto none = rule_classify("Summarize Q2 revenue");
  EXPECT_TRUE(none.ambiguous());
  EXPECT_TRUE(none.matched.empty());
}

TEST(RuleClassifierTest, OneCuePerFamily) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"Where has Dana spent time this week", "Proportional"},
      {"What has Dana missed", "Inverse"},
      {"Anything unusual with Dana", "Differential"},
      {"What has Dana kept returning to", "Recurrent"},
      {"Is Dana comparing vendors", "Comparative"},
      {"What was Dana's workflow", "Sequential"},
      {"Where is the consensus", "Collective"},
  };
  for (const auto& [q, want] : cases) EXPECT_EQ(verdict_name(rule_classify(q)), want) << q;
}

TEST(RuleClassifierTest, CustomLexiconAndJson) {
  CueLexicon lex;
  lex.cues[FilterKind::Sequential] = {"pipeline"};
  EXPECT_EQ(verdict_name(rule_classify("show the pipeline", lex)), "Sequential");
  const auto back = CueLexicon::from_json(CueLexicon::defaults().to_json());
  EXPECT_EQ(back.cues, CueLexicon::defaults().cues);
}

TEST(SoftmaxTest, SimplexAndTranslationInvariance) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto logits = random_vector(rng, kFilterCount, 50.0);
    const auto p = softmax(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    auto shifted = logits;
    for (auto& x : shifted) x += 1234.5;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < kFilterCount; ++i) EXPECT_NEAR(p[i], q[i], 1e-9);
  }
  const std::vector<double> huge{1e308, 0, 0, 0, 0, 0, -1e308};
  const auto p = softmax(huge);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_THROW(softmax(std::vector<double>(6, 0.0)), DimensionError);
}

TEST(ForwardTest, ZeroModelIsUniform) {
  const SelectorModel m(SelectorDims{64, 8, 256, 64});
  const auto p = forward(m, Embedding(64, 0.3), std::vector<double>(dts_feature_size(8), 0.1));
  for (double x : p) EXPECT_DOUBLE_EQ(x, 1.0 / 7.0);
}

TEST(ForwardTest, MatchesNaiveRecomputation) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SelectorDims dims{16, 3, 20, 9};
    auto m = SelectorModel::initialized(dims, seed);
    for (auto& l : m.layers())
      for (auto& b : l.bias) b = random_vector(rng, 1, 0.3)[0];
    const auto q = random_vector(rng, dims.d_q);
    const auto f = random_vector(rng, dts_feature_size(dims.d));
    const auto got = forward(m, q, f);
    const auto want = naive_forward(m, selector_input(q, f));
    for (std::size_t i = 0; i < kFilterCount; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(ForwardTest, DimensionMismatch) {
  const SelectorModel m(SelectorDims{8, 2, 4, 4});
  EXPECT_THROW(forward(m, Embedding(7, 0.0), std::vector<double>(16, 0.0)), DimensionError);
  EXPECT_THROW(forward(m, Embedding(8, 0.0), std::vector<double>(15, 0.0)), DimensionError);
}

TEST(LossTest, UniformIsLnSevenAndConfidentIsZero) {
  const SelectorDims dims{4, 1, 3, 3};
  SelectorModel m(dims);
  std::vector<PreparedExample> batch{{std::vector<double>(dims.input(), 1.0), 2},
                                     {std::vector<double>(dims.input(), -1.0), 5}};
  EXPECT_NEAR(mean_loss(m, batch), std::log(7.0), 1e-12);
  EXPECT_NEAR(std::log(7.0), 1.945910149055313, 1e-15);
  m.layers()[2].bias[2] = 60.0;
  EXPECT_LT(mean_loss(m, std::span(batch).first(1)), 1e-20);
  EXPECT_THROW(mean_loss(m, std::vector<PreparedExample>{}), ValidationError);
  EXPECT_THROW(loss_and_gradient(m, std::vector<PreparedExample>{}), ValidationError);
}

TEST(GradientTest, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto [model, batch] = oracle::random_problem(seed);
    const auto r = oracle::check_gradient(model, batch);
    EXPECT_EQ(r.parameters, model.parameter_count());
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(TrainTest, DeterministicAndMonotoneOverall) {
  const auto [model, batch] = oracle::random_problem(4);
  const TrainParams p{11, 0.05, 30, 2};
  const auto a = train(model, batch, p);
  const auto b = train(model, batch, p);
  EXPECT_EQ(a.model.fingerprint(), b.model.fingerprint());
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_curve.size(), 31u);
  EXPECT_LE(a.loss_curve.back(), a.loss_curve.front());
}

TEST(TrainTest, LinearlySeparableToy) {
  std::mt19937_64 rng(17);
  const SelectorDims dims{4, 1, 16, 8};
  std::vector<PreparedExample> data;
  for (int i = 0; i < 120; ++i) {
    auto x = random_vector(rng, dims.input());
    if (std::abs(x[0]) < 0.05) x[0] = 0.5;
    data.push_back({x, x[0] > 0.0 ? filter_index(FilterKind::Proportional) : filter_index(FilterKind::Inverse)});
  }
  const auto r = train(SelectorModel::initialized(dims, 2), data, TrainParams{2, 0.05, 200, 16});
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const auto p = forward_pass(r.model, ex.input).probs;
    correct += filter_index(argmax_filter(p)) == ex.target;
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(data.size()), 0.99);
}

TEST(TrainTest, SingleExampleConverges) {
  const auto [model, batch] = oracle::random_problem(9);
  const std::vector<PreparedExample> one{batch.front()};
  const auto r = train(model, one, TrainParams{1, 0.05, 400, 1});
  EXPECT_LT(r.loss_curve.back(), 1e-3);
}

TEST(TrainTest, ErrorsAndDivergence) {
  const auto [model, batch] = oracle::random_problem(2);
  EXPECT_THROW(train(model, std::vector<PreparedExample>{}, TrainParams{}), ValidationError);
  EXPECT_THROW(train(model, batch, TrainParams{1, 0.05, 1, 0}), ValidationError);
  try {
    train(model, batch, TrainParams{1, std::numeric_limits<double>::infinity(), 5, 1});
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(ModelTest, JsonRoundTripAndValidation) {
  const auto m = SelectorModel::initialized(SelectorDims{8, 2, 5, 4}, 21);
  const auto j = m.to_json();
  const auto back = SelectorModel::from_json(Json::parse(j.dump()));
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.fingerprint(), m.fingerprint());

  auto wrong_d = j;
  wrong_d["d"] = 3;
  EXPECT_THROW(SelectorModel::from_json(wrong_d), ConfigError);
  auto short_layer = j;
  short_layer["layers"][1]["bias"].erase(0);
  EXPECT_THROW(SelectorModel::from_json(short_layer), ConfigError);
  auto bad_format = j;
  bad_format["format"] = "other";
  EXPECT_THROW(SelectorModel::from_json(bad_format), ConfigError);
  EXPECT_THROW(SelectorModel::from_json(Json::object()), ConfigError);
}

TEST(ModelTest, DefaultShape) {
  const SelectorModel m(SelectorDims{64, 8, 256, 64});
  EXPECT_EQ(m.layers()[0].in, 64u + 5u * 8u + 6u);
  EXPECT_EQ(m.layers()[0].out, 256u);
  EXPECT_EQ(m.layers()[1].out, 64u);
  EXPECT_EQ(m.layers()[2].out, 7u);
}

TEST(ModalitySelectorTest, HybridSkipsMlpForUnambiguousQueries) {
  const HashingEmbedder emb(16);
  const auto model = SelectorModel::initialized(SelectorDims{16, 2, 8, 4}, 5);
  const ModalitySelector sel(&model, emb);
  const auto dts = dts_with(2, 0.2);
  const auto s = sel.select("Which documents did John keep revisiting?", dts);
  EXPECT_FALSE(s.used_mlp);
  EXPECT_EQ(s.distribution, one_hot(FilterKind::Recurrent));
  EXPECT_EQ(sel.mlp_invocations(), 0u);
  const auto amb = sel.select("Summarize Q2 revenue", dts);
  EXPECT_TRUE(amb.used_mlp);
  EXPECT_EQ(sel.mlp_invocations(), 1u);
  EXPECT_NEAR(std::accumulate(amb.distribution.begin(), amb.distribution.end(), 0.0), 1.0, 1e-9);
}

TEST(ModalitySelectorTest, ModesAndDtsDependence) {
  const HashingEmbedder emb(16);
  EXPECT_THROW(ModalitySelector(nullptr, emb, CueLexicon::defaults(), SelectorMode::MlpOnly), ConfigError);
  const ModalitySelector no_model(nullptr, emb);
  EXPECT_EQ(no_model.select("Summarize Q2 revenue", dts_with(2, 0.0)).distribution, uniform_modality());

  const auto model = SelectorModel::initialized(SelectorDims{16, 2, 8, 4}, 5);
  const ModalitySelector rule_only(&model, emb, CueLexicon::defaults(), SelectorMode::RuleOnly);
  EXPECT_EQ(rule_only.select("Summarize Q2 revenue", dts_with(2, 0.3)).distribution, uniform_modality());
  EXPECT_EQ(rule_only.mlp_invocations(), 0u);

  const ModalitySelector mlp(&model, emb, CueLexicon::defaults(), SelectorMode::MlpOnly);
  const auto a = mlp.select("Which documents did John keep revisiting?", dts_with(2, 0.3));
  EXPECT_TRUE(a.used_mlp);
  EXPECT_EQ(a.distribution, mlp.select("Which documents did John keep revisiting?", dts_with(2, 0.3)).distribution);
  EXPECT_NE(a.distribution, mlp.select("Which documents did John keep revisiting?", dts_with(2, 0.9)).distribution);

  EXPECT_EQ(selector_mode_from_name("rule-only"), SelectorMode::RuleOnly);
  EXPECT_THROW(selector_mode_from_name("mixture"), ConfigError);
}

TEST(ModalityJsonTest, RoundTrip) {
  const ModalityDistribution m{0.1, 0.2, 0.3, 0.05, 0.05, 0.15, 0.15};
  const auto j = to_json(m);
  EXPECT_TRUE(j.contains("Comparative"));
  EXPECT_EQ(modality_from_json(j), m);
  EXPECT_EQ(argmax_filter(m), FilterKind::Differential);
}
