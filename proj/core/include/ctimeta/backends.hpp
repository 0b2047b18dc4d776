#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ctimeta/extraction.hpp"

namespace ctimeta::extraction {

// Replays canned responses from sidecar files next to each attachment:
// for attachment "x.txt" the response lives in "x.response.json". Token
// usage is derived deterministically from file sizes plus seeded jitter so
// cost summaries are reproducible. The failure knobs exist for exercising
// the retry paths.
struct MockBackendOptions {
  std::filesystem::path root;           // resolves relative attachment paths
  std::string sidecar_suffix = ".response.json";
  std::string model_id = "mock-extractor-1";
  std::string effort_level = "standard";
  std::uint64_t seed = 0;
  bool fail_first_submission = false;       // whole batch, retryable, once
  std::set<std::string> flaky_ids;          // fail per-request once, retryable
  std::set<std::string> broken_ids;         // fail per-request always, not retryable
};

class MockBackend : public ExtractorBackend {
 public:
  explicit MockBackend(MockBackendOptions options);

  std::string model_id() const override { return options_.model_id; }
  std::string effort_level() const override { return options_.effort_level; }
  bool supports_batch() const override { return true; }
  bool supports_attachments() const override { return true; }

  std::vector<BackendResult> submit(const ExtractionBatch& batch) override;

  int submissions() const { return submissions_; }

 private:
  MockBackendOptions options_;
  int submissions_ = 0;
  std::set<std::string> already_flaked_;
};

// Ships a batch as newline-delimited JSON to an HTTP endpoint and expects
// the same framing back. The credential is read from an environment
// variable, never from configuration files.
struct HttpBackendOptions {
  std::string host;              // e.g. "api.example.com" or "localhost"
  int port = 443;
  std::string path = "/v1/extract/batch";
  bool use_tls = true;
  std::string api_key_env = "CTIMETA_API_KEY";
  std::string model_id = "remote-extractor";
  std::string effort_level = "standard";
  int timeout_seconds = 120;
};

class HttpBatchBackend : public ExtractorBackend {
 public:
  explicit HttpBatchBackend(HttpBackendOptions options);

  std::string model_id() const override { return options_.model_id; }
  std::string effort_level() const override { return options_.effort_level; }
  bool supports_batch() const override { return true; }
  bool supports_attachments() const override { return false; }

  std::vector<BackendResult> submit(const ExtractionBatch& batch) override;

 private:
  HttpBackendOptions options_;
};

// Backend from a config object: {"kind": "mock"|"http", ...kind options}.
std::unique_ptr<ExtractorBackend> make_backend(const nlohmann::json& config);

}  // namespace ctimeta::extraction
