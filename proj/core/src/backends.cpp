#include "ctimeta/backends.hpp"

#include <cstdlib>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ctimeta/util.hpp"

namespace ctimeta::extraction {

using nlohmann::json;

MockBackend::MockBackend(MockBackendOptions options) : options_(std::move(options)) {}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& root,
                                   const std::string& attachment,
                                   const std::string& suffix) {
  std::filesystem::path attachment_path(attachment);
  if (attachment_path.is_relative()) attachment_path = root / attachment_path;
  attachment_path.replace_extension();
  attachment_path += suffix;
  return attachment_path;
}

// Stable stand-in for measured token counts: proportional to payload size
// with a small seeded wobble, so totals differ per document but never per run.
TokenUsage synthesize_usage(const ExtractionRequest& request, std::uintmax_t payload_bytes,
                            std::uint64_t seed) {
  auto jitter = [&](const char* tag) {
    return std::stoull(
               sha256_hex(request.request_id + ":" + tag + ":" + std::to_string(seed)).substr(0, 8),
               nullptr, 16) %
           97;
  };
  TokenUsage usage;
  usage.input_tokens = static_cast<long long>(payload_bytes / 4 + request.system_prompt.size() / 4 +
                                              request.user_prompt.size() / 4 + jitter("in"));
  usage.output_tokens = static_cast<long long>(payload_bytes / 40 + 120 + jitter("out"));
  return usage;
}

}  // namespace

std::vector<BackendResult> MockBackend::submit(const ExtractionBatch& batch) {
  ++submissions_;
  if (options_.fail_first_submission && submissions_ == 1)
    throw BackendError("simulated transient outage", true);

  std::vector<BackendResult> results;
  results.reserve(batch.requests.size());
  for (const auto& request : batch.requests) {
    BackendResult result;
    result.request_id = request.request_id;

    if (options_.broken_ids.count(request.request_id)) {
      result.error = "simulated permanent failure";
      result.retryable = false;
      results.push_back(std::move(result));
      continue;
    }
    if (options_.flaky_ids.count(request.request_id) &&
        !already_flaked_.count(request.request_id)) {
      already_flaked_.insert(request.request_id);
      result.error = "simulated per-request timeout";
      result.retryable = true;
      results.push_back(std::move(result));
      continue;
    }

    if (request.attachments.empty()) {
      result.error = "no attachment to extract from";
      result.retryable = false;
      results.push_back(std::move(result));
      continue;
    }

    auto path = sidecar_path(options_.root, request.attachments.front(), options_.sidecar_suffix);
    std::error_code ec;
    auto payload_bytes = std::filesystem::file_size(path, ec);
    if (ec) payload_bytes = 0;
    try {
      result.response = json::parse(read_file(path));
    } catch (const std::exception& error) {
      result.error = std::string("sidecar unavailable: ") + error.what();
      result.retryable = false;
      results.push_back(std::move(result));
      continue;
    }
    result.usage = synthesize_usage(request, payload_bytes, options_.seed);
    results.push_back(std::move(result));
  }
  return results;
}

HttpBatchBackend::HttpBatchBackend(HttpBackendOptions options) : options_(std::move(options)) {}

std::vector<BackendResult> HttpBatchBackend::submit(const ExtractionBatch& batch) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || *key == '\0')
    throw BackendError("credential environment variable " + options_.api_key_env + " is not set",
                       false);

  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key},
                           {"Content-Type", "application/x-ndjson"}};
  std::string body = batch_to_ndjson(batch);

  httplib::Result response;
  if (options_.use_tls) {
    httplib::SSLClient client(options_.host, options_.port);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);
    response = client.Post(options_.path, headers, body, "application/x-ndjson");
  } else {
    httplib::Client client(options_.host, options_.port);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);
    response = client.Post(options_.path, headers, body, "application/x-ndjson");
  }

  if (!response)
    throw BackendError("transport failure: " + httplib::to_string(response.error()), true);
  if (response->status >= 500)
    throw BackendError("server error " + std::to_string(response->status), true);
  if (response->status != 200)
    throw BackendError("request rejected with status " + std::to_string(response->status), false);

  // Response body: one JSON object per line mirroring BackendResult.
  std::vector<BackendResult> results;
  std::istringstream stream(response->body);
  std::string line;
  while (std::getline(stream, line)) {
    if (trim(line).empty()) continue;
    json value = json::parse(line);
    BackendResult result;
    result.request_id = value.at("request_id").get<std::string>();
    result.response = value.value("response", json(nullptr));
    result.error = value.value("error", std::string());
    result.retryable = value.value("retryable", false);
    if (value.contains("usage")) {
      result.usage.input_tokens = value["usage"].value("input_tokens", 0LL);
      result.usage.output_tokens = value["usage"].value("output_tokens", 0LL);
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::unique_ptr<ExtractorBackend> make_backend(const json& config) {
  std::string kind = config.at("kind").get<std::string>();
  if (kind == "mock") {
    MockBackendOptions options;
    options.root = config.value("root", std::string());
    options.sidecar_suffix = config.value("sidecar_suffix", options.sidecar_suffix);
    options.model_id = config.value("model_id", options.model_id);
    options.effort_level = config.value("effort_level", options.effort_level);
    options.seed = config.value("seed", options.seed);
    options.fail_first_submission =
        config.value("fail_first_submission", options.fail_first_submission);
    for (const auto& id : config.value("flaky_ids", std::vector<std::string>{}))
      options.flaky_ids.insert(id);
    for (const auto& id : config.value("broken_ids", std::vector<std::string>{}))
      options.broken_ids.insert(id);
    return std::make_unique<MockBackend>(std::move(options));
  }
  if (kind == "http") {
    HttpBackendOptions options;
    options.host = config.at("host").get<std::string>();
    options.port = config.value("port", options.port);
    options.path = config.value("path", options.path);
    options.use_tls = config.value("use_tls", options.use_tls);
    options.api_key_env = config.value("api_key_env", options.api_key_env);
    options.model_id = config.value("model_id", options.model_id);
    options.effort_level = config.value("effort_level", options.effort_level);
    options.timeout_seconds = config.value("timeout_seconds", options.timeout_seconds);
    return std::make_unique<HttpBatchBackend>(std::move(options));
  }
  throw std::invalid_argument("unknown backend kind: " + kind);
}

}  // namespace ctimeta::extraction
