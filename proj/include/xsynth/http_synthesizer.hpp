#pragma once

#include <httplib.h>

#include <chrono>
#include <string>
#include <thread>

#include "xsynth/synthesis.hpp"

namespace xsynth {

struct HttpSynthesizerConfig {
  std::string url;  // http://host:port/path
  double timeout_s = 30.0;
  std::size_t retries = 2;
  double backoff_s = 0.5;
};

/// Posts {query, evidence[], annotations[]} and expects
/// {response_text, proposals[]} back.
class HttpSynthesizer final : public Synthesizer {
 public:
  explicit HttpSynthesizer(HttpSynthesizerConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("synthesizer url must include a scheme: " + cfg_.url);
    const auto path_start = cfg_.url.find('/', scheme_end + 3);
    origin_ = cfg_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.url.substr(path_start);
  }

  SynthesisResult synthesize(std::string_view query, const std::vector<EvidenceSet>& evidence) const override {
    const Json body{{"query", std::string(query)},
                    {"evidence", evidence_array(evidence)},
                    {"annotations", collect_annotations(evidence)}};
    const std::string payload = body.dump();

    httplib::Client client(origin_);
    const auto secs = std::chrono::duration<double>(cfg_.timeout_s);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(secs);
    client.set_connection_timeout(us);
    client.set_read_timeout(us);
    client.set_write_timeout(us);

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.backoff_s * static_cast<double>(attempt)));
      auto res = client.Post(path_, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        auto result = synthesis_from_json(Json::parse(res->body));
        if (result.annotations.empty()) result.annotations = collect_annotations(evidence);
        return result;
      } catch (const std::exception& e) {
        throw SynthesisError("malformed synthesizer response: " + std::string(e.what()));
      }
    }
    throw SynthesisError("synthesizer at " + cfg_.url + " unreachable after " + std::to_string(cfg_.retries + 1) +
                         " attempts: " + last_error);
  }

 private:
  HttpSynthesizerConfig cfg_;
  std::string origin_;
  std::string path_;
};

}  // namespace xsynth
