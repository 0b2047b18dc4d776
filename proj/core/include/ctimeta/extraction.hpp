#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctimeta/record.hpp"

namespace ctimeta::extraction {

struct PromptTemplates {
  std::string system_template;
  std::string user_template;
};

PromptTemplates load_templates(const std::filesystem::path& dir);

// Replaces {{name}} placeholders. An unresolved placeholder is an error:
// a silently half-rendered prompt would poison every downstream answer.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

// One report per request; responses must follow response_schema, whose
// values are all arrays so multi-valued fields and scalars share one shape.
struct ExtractionRequest {
  std::string request_id;  // document digest, unique per batch
  std::string system_prompt;
  std::string user_prompt;
  std::vector<std::string> attachments;  // document payload references
  nlohmann::json response_schema;
  std::string model_id;
  std::string effort_level;
};

// Schema the backends are asked to honor: one array-valued key per record
// field, months and taxonomy labels as closed enums.
nlohmann::json build_response_schema(const Taxonomy& taxonomy);

ExtractionRequest build_request(const ReportDocument& document, const Taxonomy& taxonomy,
                                const PromptTemplates& templates, const std::string& model_id,
                                const std::string& effort_level);

constexpr std::size_t kDefaultBatchLimit = 500;

struct ExtractionBatch {
  std::vector<ExtractionRequest> requests;
};

// Rejects oversize batches and duplicate request ids at construction.
ExtractionBatch make_batch(std::vector<ExtractionRequest> requests,
                           std::size_t max_size = kDefaultBatchLimit);

struct TokenUsage {
  long long input_tokens = 0;
  long long output_tokens = 0;

  double cost(double input_rate, double output_rate) const;

  bool operator==(const TokenUsage&) const = default;
};

// Whole-batch transport failure. retryable distinguishes a dead endpoint
// from a rejected payload.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& message, bool retryable)
      : std::runtime_error(message), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// Raw per-request outcome as the backend returned it.
struct BackendResult {
  std::string request_id;
  nlohmann::json response;  // null on failure
  std::string error;        // empty on success
  bool retryable = false;
  TokenUsage usage;
};

class ExtractorBackend {
 public:
  virtual ~ExtractorBackend() = default;

  virtual std::string model_id() const = 0;
  virtual std::string effort_level() const = 0;
  virtual bool supports_batch() const = 0;
  virtual bool supports_attachments() const = 0;

  // One result per request, batch order. Throws BackendError when the whole
  // submission failed.
  virtual std::vector<BackendResult> submit(const ExtractionBatch& batch) = 0;
};

struct FieldIssue {
  std::string field;
  std::string message;

  bool operator==(const FieldIssue&) const = default;
};

struct ParseOutcome {
  std::optional<ReportRecord> record;
  std::vector<FieldIssue> issues;

  bool ok() const { return record.has_value() && issues.empty(); }
};

// Response document back into a record, validated against the taxonomy.
// Any structural or vocabulary problem fails the parse and names the field.
ParseOutcome parse_response(const nlohmann::json& response, const std::string& report_digest,
                            const Taxonomy& taxonomy);

// Inverse of parse_response for well-formed records; used by the mock
// backend fixtures and the round-trip checks.
nlohmann::json render_response(const ReportRecord& record);

struct ExtractionResult {
  std::string request_id;
  std::optional<ReportRecord> record;
  std::vector<FieldIssue> issues;
  std::string error;  // transport-level failure, empty otherwise
  TokenUsage usage;
};

struct RunOptions {
  int batch_attempts = 3;         // whole-batch tries on retryable errors
  int per_request_resubmits = 1;  // each failed request resubmitted at most once
  std::chrono::milliseconds backoff_base{250};  // doubles per retry; zero in tests
};

// Drives one batch through a backend: whole-batch retries with exponential
// backoff, one resubmission round for individually failed requests, then
// parsing. Every request yields exactly one result, in batch order; a
// failed request never aborts the rest. on_result fires per final result so
// callers can persist incrementally.
std::vector<ExtractionResult> run_extraction(
    const ExtractionBatch& batch, ExtractorBackend& backend, const Taxonomy& taxonomy,
    const RunOptions& options = {},
    const std::function<void(const ExtractionResult&)>& on_result = nullptr);

struct CostEstimate {
  double total_cost = 0.0;
  long long total_input_tokens = 0;
  long long total_output_tokens = 0;
  double q1_tokens = 0.0;      // quartiles of per-request total tokens
  double median_tokens = 0.0;
  double q3_tokens = 0.0;
};

// Linear cost plus the per-request token distribution. Rates must be
// nonnegative; an empty usage list costs nothing.
CostEstimate estimate_cost(const std::vector<TokenUsage>& usages, double input_rate,
                           double output_rate);

// Newline-delimited JSON round trips for batches and results.
std::string batch_to_ndjson(const ExtractionBatch& batch);
ExtractionBatch batch_from_ndjson(const std::string& text, std::size_t max_size = kDefaultBatchLimit);

std::string result_to_json_line(const ExtractionResult& result);
std::vector<ExtractionResult> results_from_ndjson(const std::string& text);

}  // namespace ctimeta::extraction
