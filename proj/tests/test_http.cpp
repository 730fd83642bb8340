#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "test_support.hpp"
#include "xsynth/http_synthesizer.hpp"

using namespace xsynth;
using namespace xsynth::testing;

namespace {

/// Local endpoint on an ephemeral port, stopped on destruction.
class MockEndpoint {
 public:
  explicit MockEndpoint(httplib::Server::Handler handler) {
    server_.Post("/synthesize", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/synthesize"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpSynthesizerConfig fast(std::string url) {
  HttpSynthesizerConfig c;
  c.url = std::move(url);
  c.timeout_s = 2.0;
  c.retries = 1;
  c.backoff_s = 0.0;
  return c;
}

std::vector<EvidenceSet> evidence() {
  EvidenceItem i;
  i.participant_id = "p";
  i.artifact.artifact_id = "a1";
  i.artifact.app = "Vault";
  i.title = "Initech MSA";
  i.weight = 0.8;
  i.annotation = "Recurrent: revisited 2 times";
  i.attributes = {{"account", "Initech"}};
  return {EvidenceSet{"p", {i}}};
}

}  // namespace

TEST(HttpSynthesizerTest, UrlNeedsScheme) {
  EXPECT_THROW(HttpSynthesizer(fast("localhost:8080/x")), ConfigError);
}

TEST(HttpSynthesizerTest, UnreachableEndpointIsSynthesisError) {
  // Port 1 on loopback refuses connections.
  const HttpSynthesizer synth(fast("http://127.0.0.1:1/synthesize"));
  try {
    synth.synthesize("q", evidence());
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_NE(std::string(e.what()).find("after 2 attempts"), std::string::npos) << e.what();
  }
}

TEST(HttpSynthesizerTest, RoundTripThroughMockServer) {
  Json seen;
  MockEndpoint mock([&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    const Json reply{{"response_text", "One lead."},
                     {"proposals", Json::array({Json{{"account", "Initech"},
                                                     {"description", "Initech renewal expansion"},
                                                     {"attributes", Json{{"module", "storage tier"}}},
                                                     {"evidence_refs", Json::array({"p/a1"})}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  const HttpSynthesizer synth(fast(mock.url()));
  const auto ev = evidence();
  const auto r = synth.synthesize("who needs a call?", ev);
  EXPECT_EQ(seen.at("query"), "who needs a call?");
  ASSERT_EQ(seen.at("evidence").size(), 1u);
  EXPECT_EQ(seen.at("annotations")[0], "p/a1: Recurrent: revisited 2 times");
  EXPECT_EQ(r.response_text, "One lead.");
  ASSERT_EQ(r.proposals.size(), 1u);
  EXPECT_EQ(r.proposals[0].account, "Initech");
  EXPECT_EQ(r.proposals[0].evidence_refs, (std::vector<std::string>{"p/a1"}));
  // Annotations omitted by the endpoint are filled from the evidence.
  EXPECT_EQ(r.annotations, collect_annotations(ev));
  EXPECT_TRUE(citations_resolve(r, ev));
}

TEST(HttpSynthesizerTest, RetriesServerErrors) {
  std::atomic<int> calls{0};
  MockEndpoint mock([&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) == 0) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"response_text":"ok","proposals":[]})", "application/json");
  });
  const HttpSynthesizer synth(fast(mock.url()));
  EXPECT_EQ(synth.synthesize("q", evidence()).response_text, "ok");
  EXPECT_EQ(calls.load(), 2);

  auto once = fast(mock.url());
  once.retries = 0;
  calls = 0;
  EXPECT_THROW(HttpSynthesizer(once).synthesize("q", evidence()), SynthesisError);
}

TEST(HttpSynthesizerTest, MalformedResponseIsSynthesisError) {
  for (const std::string body : {"not json", R"({"proposals":[{"description":3}]})", R"({"proposals":7})"}) {
    MockEndpoint mock([&](const httplib::Request&, httplib::Response& res) {
      res.set_content(body, "application/json");
    });
    EXPECT_THROW(HttpSynthesizer(fast(mock.url())).synthesize("q", evidence()), SynthesisError) << body;
  }
}

TEST(HttpSynthesizerTest, PipelineReportsSynthesisStage) {
  const EventLog log({ev("p", "Vault", 3600, "Initech MSA", 300, "view", "initech contract review",
                         {{"account", "Initech"}})});
  const Engine engine(log, DomainRules::defaults());
  const HttpSynthesizer synth(fast("http://127.0.0.1:1/synthesize"));
  try {
    engine.run_query("p: initech contract review status?", kT0 + days(1), nullptr, synth);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::Synthesis);
  }
}
