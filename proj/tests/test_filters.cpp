#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "filter_oracles.hpp"
#include "test_support.hpp"

using namespace xsynth;
using namespace xsynth::testing;

namespace {

Observation obs(const std::string& pid, const std::string& id, std::size_t dom, std::int64_t t, double dwell) {
  Observation o;
  o.ts = kT0 + Seconds{t};
  o.participant_id = pid;
  o.artifact_id = id;
  o.domain = dom;
  o.dwell = dwell;
  o.action = "view";
  return o;
}

Artifact art(const std::string& id, std::size_t dom) {
  Artifact a;
  a.artifact_id = id;
  a.domain_index = dom;
  a.domain = dom == 0 ? "alpha" : "beta";
  return a;
}

BaselineStats flat_baseline(std::vector<double> mean, std::vector<double> sd) {
  BaselineStats b;
  const auto d = mean.size();
  b.mean = std::move(mean);
  b.stddev = std::move(sd);
  b.transition.assign(d, std::vector<double>(d, 1.0 / static_cast<double>(d)));
  return b;
}

void expect_scores(const ImportanceMap& m, const std::map<std::string, double>& want, double tol = 1e-12) {
  ASSERT_EQ(m.scores.size(), want.size());
  for (const auto& [id, v] : want) EXPECT_NEAR(m.score(id), v, tol) << id;
}

}  // namespace

TEST(FilterKindTest, OrdinalsAndNames) {
  EXPECT_EQ(kAllFilters.size(), 7u);
  for (std::size_t i = 0; i < kFilterCount; ++i) {
    EXPECT_EQ(ordinal(filter_at(i)), static_cast<int>(i) + 1);
    EXPECT_EQ(filter_from_name(filter_name(filter_at(i))), filter_at(i));
  }
  EXPECT_EQ(filter_from_name("sequential"), FilterKind::Sequential);
  EXPECT_THROW(filter_from_name("Bayesian"), ParseError);
}

TEST(ProportionalTest, NormalizesByMax) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 30), obs("p", "a2", 0, 10, 70)};
  const auto m = proportional(ev, arts);
  expect_scores(m, {{"a1", 30.0 / 70.0}, {"a2", 1.0}});
  EXPECT_DOUBLE_EQ(m.raw_value("a2"), 70.0);
}

TEST(ProportionalTest, SingleArtifactAndEmpty) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 1)};
  expect_scores(proportional(std::vector{obs("p", "a1", 0, 0, 5)}, arts), {{"a1", 1.0}, {"a2", 0.0}});
  expect_scores(proportional(std::vector<Observation>{}, arts), {{"a1", 0.0}, {"a2", 0.0}});
}

TEST(InverseTest, ToyCohortMatchesHandComputation) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0), art("b1", 1)};
  const std::vector<Observation> mine{obs("p", "a1", 0, 0, 20)};
  const std::vector<Observation> cohort{obs("p", "a1", 0, 0, 20), obs("q", "a1", 0, 5, 10),
                                       obs("q", "a2", 0, 10, 30), obs("q", "b1", 1, 20, 50)};
  DigitalTwinSignature dts;
  dts.v_resp = {0.8, 0.1};
  const auto share = cohort_attention_share(cohort, arts, 2);
  EXPECT_DOUBLE_EQ(share.at("a1"), 0.5);
  EXPECT_DOUBLE_EQ(share.at("a2"), 0.5);
  EXPECT_DOUBLE_EQ(share.at("b1"), 1.0);
  const auto m = inverse(mine, arts, dts, share);
  EXPECT_NEAR(m.raw_value("a2"), 0.4, 1e-12);
  // a1 was attended, b1 sits in a domain p does not own.
  expect_scores(m, {{"a1", 0.0}, {"a2", 1.0}, {"b1", 0.0}});
}

TEST(InverseTest, LowAttentionThreshold) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0)};
  const std::vector<Observation> mine{obs("p", "a1", 0, 0, 20)};
  DigitalTwinSignature dts;
  dts.v_resp = {1.0, 0.0};
  const std::map<std::string, double> share{{"a1", 0.25}, {"a2", 0.75}};
  FilterParams p;
  p.low_attention_threshold = 30.0;
  const auto m = inverse(mine, arts, dts, share, p);
  EXPECT_DOUBLE_EQ(m.raw_value("a1"), 0.25);
  EXPECT_DOUBLE_EQ(m.raw_value("a2"), 0.75);
}

TEST(DifferentialTest, ZScoreOfThreePropagates) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0), art("b1", 1)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 60), obs("p", "a2", 0, 10, 20), obs("p", "b1", 1, 20, 20)};
  const auto m = differential(ev, arts, flat_baseline({0.5, 0.5}, {0.1, 0.1}));
  EXPECT_NEAR(m.raw_value("a1"), 3.0 * 0.75, 1e-12);
  EXPECT_NEAR(m.raw_value("a2"), 3.0 * 0.25, 1e-12);
  EXPECT_NEAR(m.raw_value("b1"), 3.0, 1e-12);
  expect_scores(m, {{"a1", 0.75}, {"a2", 0.25}, {"b1", 1.0}});
}

TEST(DifferentialTest, AtBaselineMeanScoresZero) {
  const std::vector<Artifact> arts{art("a1", 0), art("b1", 1)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 50), obs("p", "b1", 1, 10, 50)};
  expect_scores(differential(ev, arts, flat_baseline({0.5, 0.5}, {0.2, 0.2})), {{"a1", 0.0}, {"b1", 0.0}});
}

TEST(DifferentialTest, ZeroStdUsesFloorAndDropIsUniform) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0), art("b1", 1)};
  const std::vector<Observation> ev{obs("p", "b1", 1, 0, 10)};
  const auto m = differential(ev, arts, flat_baseline({0.4, 0.6}, {0.0, 0.0}));
  EXPECT_TRUE(std::isfinite(m.raw_value("a1")));
  EXPECT_NEAR(m.raw_value("a1"), 0.4 / 0.01 * 0.5, 1e-9);
  EXPECT_NEAR(m.raw_value("a2"), m.raw_value("a1"), 1e-12);
  EXPECT_NEAR(m.raw_value("b1"), 0.4 / 0.01, 1e-9);
}

TEST(RecurrentTest, RunCounting) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 5), obs("p", "a2", 0, 10, 500),
                                    obs("p", "a1", 0, 20, 5), obs("p", "a1", 0, 30, 5)};
  expect_scores(recurrent(ev, sessionize(ev), arts), {{"a1", 1.0}, {"a2", 0.0}});
}

TEST(RecurrentTest, SessionBoundaryStartsNewVisit) {
  const std::vector<Artifact> arts{art("a1", 0)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 5), obs("p", "a1", 0, 4000, 5)};
  const auto m = recurrent(ev, sessionize(ev, 1800), arts);
  EXPECT_DOUBLE_EQ(m.raw_value("a1"), 1.0);
}

TEST(RecurrentTest, SingleVisitsAndEmpty) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0)};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 5), obs("p", "a2", 0, 10, 5)};
  expect_scores(recurrent(ev, sessionize(ev), arts), {{"a1", 0.0}, {"a2", 0.0}});
  const std::vector<Observation> none;
  expect_scores(recurrent(none, sessionize(none), arts), {{"a1", 0.0}, {"a2", 0.0}});
}

TEST(ComparativeTest, StrictAlternation) {
  const std::vector<Artifact> arts{art("A", 0), art("B", 0), art("C", 0)};
  const std::map<std::string, Embedding> emb{{"A", {1.0, 0.0}}, {"B", {0.8, 0.6}}, {"C", {0.0, 1.0}}};
  const std::vector<Observation> ev{obs("p", "A", 0, 0, 5), obs("p", "B", 0, 60, 5), obs("p", "A", 0, 120, 5),
                                    obs("p", "B", 0, 180, 5)};
  const auto m = comparative(ev, arts, emb);
  EXPECT_DOUBLE_EQ(m.raw_value("A"), 3.0);
  expect_scores(m, {{"A", 1.0}, {"B", 1.0}, {"C", 0.0}});
}

TEST(ComparativeTest, DissimilarOrSlowOrSingleIsZero) {
  const std::vector<Artifact> arts{art("A", 0), art("B", 0), art("C", 0)};
  const std::map<std::string, Embedding> emb{{"A", {1.0, 0.0}}, {"B", {0.8, 0.6}}, {"C", {0.0, 1.0}}};
  const std::vector<Observation> dissimilar{obs("p", "A", 0, 0, 5), obs("p", "C", 0, 60, 5), obs("p", "A", 0, 120, 5)};
  EXPECT_EQ(comparative(dissimilar, arts, emb).max_score(), 0.0);
  const std::vector<Observation> slow{obs("p", "A", 0, 0, 5), obs("p", "B", 0, 300, 5)};
  EXPECT_EQ(comparative(slow, arts, emb).max_score(), 0.0);
  const std::vector<Observation> single{obs("p", "A", 0, 0, 5), obs("p", "A", 0, 10, 5)};
  EXPECT_EQ(comparative(single, arts, emb).max_score(), 0.0);
}

TEST(SequentialTest, SurpriseOfSmoothedTransitions) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0), art("b1", 1), art("b2", 1)};
  BaselineStats b = flat_baseline({0.5, 0.5}, {0.1, 0.1});
  b.transition = {{0.9, 0.1}, {0.5, 0.5}};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 5), obs("p", "b1", 1, 10, 5), obs("p", "b2", 1, 20, 5),
                                    obs("p", "a2", 0, 30, 5)};
  const auto m = sequential(ev, b, arts);
  EXPECT_NEAR(m.raw_value("b1"), 2.302585092994046, 1e-12);
  EXPECT_NEAR(m.raw_value("b2"), 0.693147180559945, 1e-12);
  EXPECT_NEAR(m.raw_value("a2"), 0.693147180559945, 1e-12);
  expect_scores(m, {{"a1", 0.0}, {"a2", 0.301029995663981}, {"b1", 1.0}, {"b2", 0.301029995663981}});
}

TEST(SequentialTest, ExpectedTransitionsScoreMinimalAndSingleEventIsZero) {
  const std::vector<Artifact> arts{art("a1", 0), art("a2", 0)};
  BaselineStats b = flat_baseline({1.0, 0.0}, {0.0, 0.0});
  b.transition = {{0.9, 0.1}, {0.5, 0.5}};
  const std::vector<Observation> ev{obs("p", "a1", 0, 0, 5), obs("p", "a2", 0, 10, 5), obs("p", "a1", 0, 20, 5)};
  const auto m = sequential(ev, b, arts);
  EXPECT_NEAR(m.raw_value("a1"), -std::log(0.9), 1e-15);
  EXPECT_NEAR(m.raw_value("a2"), -std::log(0.9), 1e-15);
  EXPECT_EQ(sequential(std::vector{obs("p", "a1", 0, 0, 5)}, b, arts).max_score(), 0.0);
}

TEST(CollectiveTest, ThreeParticipantBlend) {
  const std::vector<Artifact> arts{art("a", 0), art("b", 0), art("c", 0)};
  const CohortDwell dwell{{"p1", {{"a", 10}, {"b", 30}}}, {"p2", {{"a", 20}, {"b", 20}}}, {"p3", {{"b", 50}, {"c", 25}}}};
  const auto m = collective(dwell, arts);
  expect_scores(m, {{"a", 0.722222222222222}, {"b", 1.0}, {"c", 0.333333333333333}}, 1e-12);
}

TEST(CollectiveTest, IdenticalAttentionHasNoOutlierTerm) {
  const std::vector<Artifact> arts{art("a", 0), art("b", 0)};
  const CohortDwell dwell{{"p1", {{"a", 10}, {"b", 5}}}, {"p2", {{"a", 40}, {"b", 20}}}};
  const auto m = collective(dwell, arts);
  EXPECT_DOUBLE_EQ(m.raw_value("a"), 1.0);
  EXPECT_DOUBLE_EQ(m.raw_value("b"), 0.5);
}

TEST(CollectiveTest, EmptyCohortIsAnError) {
  EXPECT_THROW(collective(CohortDwell{}, std::vector{art("a", 0)}), ValidationError);
}

TEST(FilterOracleTest, BruteForceEquivalenceOnRandomLogs) {
  std::mt19937_64 rng(20260302);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = oracle::make_filter_case(rng, 20, [](auto& r, std::size_t n, std::int64_t span) {
      return random_log(r, n, span);
    });
    const auto dev = oracle::compare_all(c);
    for (std::size_t k = 0; k < kFilterCount; ++k)
      ASSERT_EQ(dev[k], 0.0) << filter_name(filter_at(k)) << " trial " << trial;
  }
}

TEST(FilterPropertyTest, RangeAndMaxIsOne) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::make_filter_case(rng, 20, [](auto& r, std::size_t n, std::int64_t span) {
      return random_log(r, n, span);
    });
    const auto& arts = c.catalog.artifacts();
    const auto share = cohort_attention_share(c.window, arts, c.catalog.domains().size());
    const std::vector<ImportanceMap> maps{
        proportional(c.mine, arts),
        inverse(c.mine, arts, c.dts, share, c.params),
        differential(c.mine, arts, c.baseline, c.params),
        recurrent(c.mine, sessionize(c.mine), arts),
        comparative(c.mine, arts, c.embeddings, c.params),
        sequential(c.mine, c.baseline, arts),
        collective(cohort_dwell(c.window, c.cohort), arts, c.params)};
    for (const auto& m : maps) {
      bool any = false;
      for (const auto& [id, s] : m.scores) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        any = any || m.raw_value(id) > 0.0;
      }
      EXPECT_EQ(m.max_score(), any ? 1.0 : 0.0);
    }
  }
}

TEST(FilterPropertyTest, DwellScalingOrthogonality) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::make_filter_case(rng, 20, [](auto& r, std::size_t n, std::int64_t span) {
      return random_log(r, n, span);
    });
    auto scaled = c.mine;
    for (auto& o : scaled) o.dwell *= 3.5;
    const auto& arts = c.catalog.artifacts();
    const auto r1 = recurrent(c.mine, sessionize(c.mine), arts);
    const auto r2 = recurrent(scaled, sessionize(scaled), arts);
    EXPECT_EQ(r1.scores, r2.scores);
    const auto p1 = proportional(c.mine, arts);
    const auto p2 = proportional(scaled, arts);
    for (const auto& [x, sx] : p1.scores)
      for (const auto& [y, sy] : p1.scores)
        if (sx < sy) {
          EXPECT_LT(p2.score(x), p2.score(y));
        }
  }
}

TEST(FilterPropertyTest, InverseComplementsProportional) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::make_filter_case(rng, 20, [](auto& r, std::size_t n, std::int64_t span) {
      return random_log(r, n, span);
    });
    const auto& arts = c.catalog.artifacts();
    const auto share = cohort_attention_share(c.window, arts, c.catalog.domains().size());
    const auto inv = inverse(c.mine, arts, c.dts, share);
    const auto prop = proportional(c.mine, arts);
    for (const auto& [id, s] : prop.scores)
      if (s > 0.0) {
        EXPECT_EQ(inv.score(id), 0.0) << id;
      }
  }
}

TEST(FilterPropertyTest, Deterministic) {
  std::mt19937_64 a(99), b(99);
  auto make = [](auto& r, std::size_t n, std::int64_t span) { return random_log(r, n, span); };
  const auto c1 = oracle::make_filter_case(a, 20, make);
  const auto c2 = oracle::make_filter_case(b, 20, make);
  const auto& arts = c1.catalog.artifacts();
  EXPECT_EQ(differential(c1.mine, arts, c1.baseline).scores, differential(c2.mine, arts, c2.baseline).scores);
  EXPECT_EQ(comparative(c1.mine, arts, c1.embeddings).scores, comparative(c2.mine, arts, c2.embeddings).scores);
}
