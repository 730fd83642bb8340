#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace xsynth;

namespace {

EvidenceItem item(const std::string& pid, const std::string& id, const std::string& app, double weight,
                  Attributes attrs, std::string snippet, std::string annotation = "Proportional: dwelled 2.0 min in window") {
  EvidenceItem e;
  e.participant_id = pid;
  e.artifact.artifact_id = id;
  e.artifact.app = app;
  e.artifact.title_key = id;
  e.title = id;
  e.weight = weight;
  e.attention = weight;
  e.content = 1.0;
  e.attributes = std::move(attrs);
  e.snippet = std::move(snippet);
  e.annotation = std::move(annotation);
  return e;
}

/// Ten snippets over four days for one seller: individually weak signals that
/// together describe a streaming-module gap at Acme Corp with a competitor.
std::vector<EvidenceSet> acme_fixture() {
  EvidenceSet s;
  s.participant_id = "s.chen";
  s.items = {
      item("s.chen", "a01", "Slack", 0.30, {},
           "JW asking whether platform handles high-frequency event delivery at low latency."),
      item("s.chen", "a02", "Lens", 0.62, {{"account", "Acme Corp"}, {"module", "streaming"}},
           "account: AC. streaming: no license. active_users: 2 of 9."),
      item("s.chen", "a03", "Gmail", 0.41, {{"account", "Acme Corp"}},
           "We have been working around a limitation for some time."),
      item("s.chen", "a04", "Helix", 0.22, {}, "ticket 9203: ingestion behavior reported, open, unassigned."),
      item("s.chen", "a05", "Vault", 0.81, {{"account", "Acme Corp"}}, "AC MSA v2.1. Sections: 3, 7.",
           "Recurrent: revisited 2 times"),
      item("s.chen", "a06", "Helix", 0.35, {{"account", "Acme Corp"}, {"module", "streaming"}},
           "query: add-on pricing tier 2 accounts FSI."),
      item("s.chen", "a07", "Slack", 0.48,
           {{"account", "Acme Corp"}, {"module", "streaming"}, {"competitor", "RiverFlow"}},
           "Kafka environment, FSI context. RF may be relevant background."),
      item("s.chen", "a08", "Slack", 0.27, {{"account", "Acme Corp"}, {"competitor", "RiverFlow"}},
           "D.Kim: flagging the RF thing we discussed."),
      item("s.chen", "a09", "Slack", 0.12, {{"account", "Globex"}}, "Globex renewal follow-up."),
      item("s.chen", "a10", "Meridian", 0.18, {}, "Pipeline dashboard."),
  };
  return {s};
}

}  // namespace

TEST(TemplateSynthesizerTest, EmptyEvidenceMeansNoLeads) {
  const TemplateSynthesizer synth;
  const auto r = synth.synthesize("any leads?", {});
  EXPECT_TRUE(r.proposals.empty());
  EXPECT_NE(r.response_text.find("No new leads"), std::string::npos);
  EXPECT_TRUE(r.annotations.empty());
  const auto r2 = synth.synthesize("any leads?", {EvidenceSet{"p", {}}});
  EXPECT_TRUE(r2.proposals.empty());
}

TEST(TemplateSynthesizerTest, OneClusterOneProposalCitingOnlySuppliedRefs) {
  EvidenceSet s{"p", {item("p", "x1", "Vault", 0.5, {{"account", "Initech"}}, "MSA"),
                      item("p", "x2", "Lens", 0.4, {{"account", "initech "}}, "usage report"),
                      item("p", "x3", "Wiki", 0.1, {}, "lunch")}};
  const TemplateSynthesizer synth;
  const auto r = synth.synthesize("q", {s});
  ASSERT_EQ(r.proposals.size(), 1u);
  EXPECT_EQ(r.proposals[0].account, "Initech");
  EXPECT_EQ(r.proposals[0].evidence_refs, (std::vector<std::string>{"p/x1", "p/x2"}));
  EXPECT_TRUE(citations_resolve(r, {s}));
  EXPECT_EQ(r.annotations.size(), 3u);
  EXPECT_EQ(r.annotations[0], "p/x1: Proportional: dwelled 2.0 min in window");
}

TEST(TemplateSynthesizerTest, ThresholdsSuppressWeakClusters) {
  const TemplateSynthesizer synth;
  // Single-item cluster.
  EXPECT_TRUE(synth.synthesize("q", {EvidenceSet{"p", {item("p", "x1", "Vault", 1.0, {{"account", "A"}}, "")}}})
                  .proposals.empty());
  // Two items but under 15% of the total evidence weight.
  EvidenceSet s{"p", {item("p", "x1", "Vault", 0.05, {{"account", "A"}}, ""),
                      item("p", "x2", "Vault", 0.05, {{"account", "A"}}, ""),
                      item("p", "x3", "Wiki", 0.9, {}, "")}};
  EXPECT_TRUE(synth.synthesize("q", {s}).proposals.empty());
  TemplateParams loose;
  loose.min_cluster_share = 0.05;
  EXPECT_EQ(TemplateSynthesizer(loose).synthesize("q", {s}).proposals.size(), 1u);
}

TEST(TemplateSynthesizerTest, AcmeFixtureYieldsSingleCompetitorProposal) {
  const auto evidence = acme_fixture();
  const TemplateSynthesizer synth;
  const auto r = synth.synthesize("s.chen: which accounts show signs of a new opportunity?", evidence);
  ASSERT_EQ(r.proposals.size(), 1u);
  const auto& p = r.proposals[0];
  EXPECT_EQ(p.account, "Acme Corp");
  ASSERT_NE(p.attribute("competitor"), nullptr);
  EXPECT_EQ(*p.attribute("competitor"), "RiverFlow");
  ASSERT_NE(p.attribute("module"), nullptr);
  EXPECT_EQ(*p.attribute("module"), "streaming");
  EXPECT_EQ(p.evidence_refs.front(), "s.chen/a05");
  EXPECT_EQ(p.evidence_refs.size(), 6u);
  EXPECT_NE(p.description.find("Recurrent: revisited 2 times"), std::string::npos);
  EXPECT_TRUE(citations_resolve(r, evidence));

  GroundTruthFiling filing;
  filing.account = "Acme Corp";
  filing.description = "New streaming module expansion for Acme Corp; competitor RiverFlow is active";
  filing.attributes = {{"account", "Acme Corp"}, {"module", "streaming"}, {"competitor", "RiverFlow"}};
  const HashingEmbedder emb(64);
  const auto m = match_proposal(p, filing, emb);
  EXPECT_TRUE(m.attributes_match);
  EXPECT_TRUE(m.matched);
}

TEST(TemplateSynthesizerTest, AttributeMergeUsesEvidenceWeight) {
  EvidenceSet s{"p", {item("p", "x1", "Vault", 0.2, {{"account", "A"}, {"module", "batch"}}, ""),
                      item("p", "x2", "Lens", 0.2, {{"account", "A"}, {"module", "batch"}}, ""),
                      item("p", "x3", "Lens", 0.5, {{"account", "A"}, {"module", "streaming"}}, "")}};
  const auto r = TemplateSynthesizer().synthesize("q", {s});
  ASSERT_EQ(r.proposals.size(), 1u);
  EXPECT_EQ(*r.proposals[0].attribute("module"), "streaming");
  EXPECT_EQ(r.proposals[0].description.rfind("Opportunity for A, module streaming. Evidence:", 0), 0u);
}

TEST(TemplateSynthesizerTest, LongSnippetsAreTruncated) {
  TemplateParams p;
  p.snippet_chars = 10;
  EvidenceSet s{"p", {item("p", "x1", "Vault", 0.5, {{"account", "A"}}, std::string(50, 'z')),
                      item("p", "x2", "Vault", 0.5, {{"account", "A"}}, "short")}};
  const auto r = TemplateSynthesizer(p).synthesize("q", {s});
  ASSERT_EQ(r.proposals.size(), 1u);
  EXPECT_NE(r.proposals[0].description.find(std::string(10, 'z') + "..."), std::string::npos);
  EXPECT_EQ(r.proposals[0].description.find(std::string(11, 'z')), std::string::npos);
}

TEST(TemplateSynthesizerTest, CitationClosureOnRandomEvidence) {
  std::mt19937_64 rng(13);
  const std::vector<std::string> accounts{"A", "B", "C"};
  const TemplateSynthesizer synth;
  for (int t = 0; t < 200; ++t) {
    std::vector<EvidenceSet> evidence;
    for (int u = 0; u < 3; ++u) {
      EvidenceSet s;
      s.participant_id = "p" + std::to_string(u);
      const auto n = rng() % 8;
      for (std::size_t i = 0; i < n; ++i) {
        Attributes attrs;
        if (rng() % 3) attrs.emplace_back("account", accounts[rng() % accounts.size()]);
        s.items.push_back(item(s.participant_id, "a" + std::to_string(i), "Vault",
                               static_cast<double>(1 + rng() % 100) / 100.0, attrs, "snippet"));
      }
      evidence.push_back(std::move(s));
    }
    const auto r = synth.synthesize("q", evidence);
    EXPECT_TRUE(citations_resolve(r, evidence));
    EXPECT_EQ(r, synth.synthesize("q", evidence));
  }
}

TEST(CitationTest, DetectsUnknownRefs) {
  const auto evidence = acme_fixture();
  auto r = TemplateSynthesizer().synthesize("q", evidence);
  ASSERT_FALSE(r.proposals.empty());
  r.proposals[0].evidence_refs.push_back("nobody/a99");
  EXPECT_FALSE(citations_resolve(r, evidence));
}

TEST(SynthesisJsonTest, RoundTrip) {
  const auto r = TemplateSynthesizer().synthesize("q", acme_fixture());
  EXPECT_EQ(synthesis_from_json(Json::parse(to_json(r).dump())), r);
  const auto p = proposal_from_json(Json::parse(R"({"account":"A","description":"d",
      "attributes":{"module":"streaming"},"evidence_refs":["p/a1"]})"));
  EXPECT_EQ(p.attributes, (Attributes{{"module", "streaming"}}));
  EXPECT_EQ(p.evidence_refs, (std::vector<std::string>{"p/a1"}));
}
