#include "ctimeta/extraction.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <thread>

#include "ctimeta/analytics.hpp"
#include "ctimeta/util.hpp"

namespace ctimeta::extraction {

namespace {

using nlohmann::json;

std::string label_token(const TaxonomyLabel& label) {
  return label.level1 + " :: " + label.level2;
}

// "ACR :: Level2" back into a label; the separator is unambiguous because
// acronyms never contain spaces.
std::optional<TaxonomyLabel> parse_label_token(LabelKind kind, const std::string& token) {
  auto pos = token.find(" :: ");
  if (pos == std::string::npos || pos == 0 || pos + 4 >= token.size()) return std::nullopt;
  return TaxonomyLabel{kind, token.substr(0, pos), token.substr(pos + 4)};
}

json label_enum(const Taxonomy& taxonomy, LabelKind kind) {
  json values = json::array();
  for (const auto& label : taxonomy.all_labels(kind)) values.push_back(label_token(label));
  return values;
}

json string_array_schema() {
  return json{{"type", "array"}, {"items", json{{"type", "string"}}}};
}

}  // namespace

PromptTemplates load_templates(const std::filesystem::path& dir) {
  PromptTemplates templates;
  templates.system_template = read_file(dir / "system_prompt.txt");
  templates.user_template = read_file(dir / "user_prompt.txt");
  return templates;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos)
      throw std::invalid_argument("unterminated placeholder in template");
    std::string name = trim(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw std::invalid_argument("unresolved template variable: " + name);
    out += it->second;
    pos = close + 2;
  }
  return out;
}

json build_response_schema(const Taxonomy& taxonomy) {
  json month_values = json::array();
  for (const auto* name : kMonthNames) month_values.push_back(name);

  json properties;
  properties["title"] = string_array_schema();
  properties["vendor"] = string_array_schema();
  properties["year"] = json{{"type", "array"}, {"items", json{{"type", "integer"}}}};
  properties["month"] =
      json{{"type", "array"}, {"items", json{{"type", "string"}, {"enum", month_values}}}};
  properties["report_type"] =
      json{{"type", "array"},
           {"items", json{{"type", "string"}, {"enum", label_enum(taxonomy, LabelKind::report_type)}}}};
  properties["motivations"] =
      json{{"type", "array"},
           {"items", json{{"type", "string"}, {"enum", label_enum(taxonomy, LabelKind::motivation)}}}};
  properties["sectors"] =
      json{{"type", "array"},
           {"items", json{{"type", "string"}, {"enum", label_enum(taxonomy, LabelKind::sector)}}}};
  properties["threat_actors"] = string_array_schema();
  properties["victims"] = string_array_schema();
  properties["geographies"] = string_array_schema();
  properties["campaign_duration"] =
      json{{"type", "array"},
           {"maxItems", 1},
           {"items", json{{"type", "object"},
                          {"properties", json{{"start", json{{"type", "string"}}},
                                              {"end", json{{"type", "string"}}}}},
                          {"required", json::array({"start", "end"})}}}};
  properties["iocs"] = string_array_schema();
  properties["ttps"] =
      json{{"type", "array"},
           {"items", json{{"type", "string"}, {"pattern", "^T[0-9]{4}(\\.[0-9]{3})?$"}}}};

  json required = json::array();
  for (const auto& [key, value] : properties.items()) {
    (void)value;
    required.push_back(key);
  }

  return json{{"type", "object"},
              {"properties", properties},
              {"required", required},
              {"additionalProperties", false}};
}

ExtractionRequest build_request(const ReportDocument& document, const Taxonomy& taxonomy,
                                const PromptTemplates& templates, const std::string& model_id,
                                const std::string& effort_level) {
  if (document.digest.empty()) throw std::invalid_argument("document has no digest");
  std::map<std::string, std::string> vars{
      {"title_hint", document.title_hint},
      {"source", std::string(to_string(document.source))},
      {"language", document.language},
      {"word_count", std::to_string(document.word_count)},
  };
  ExtractionRequest request;
  request.request_id = document.digest;
  request.system_prompt = render_template(templates.system_template, vars);
  request.user_prompt = render_template(templates.user_template, vars);
  request.attachments.push_back(document.path);
  request.response_schema = build_response_schema(taxonomy);
  request.model_id = model_id;
  request.effort_level = effort_level;
  return request;
}

ExtractionBatch make_batch(std::vector<ExtractionRequest> requests, std::size_t max_size) {
  if (requests.size() > max_size)
    throw std::invalid_argument("batch of " + std::to_string(requests.size()) +
                                " exceeds limit of " + std::to_string(max_size));
  std::set<std::string> seen;
  for (const auto& request : requests) {
    if (request.request_id.empty()) throw std::invalid_argument("request with empty id");
    if (!seen.insert(request.request_id).second)
      throw std::invalid_argument("duplicate request id: " + request.request_id);
  }
  return ExtractionBatch{std::move(requests)};
}

double TokenUsage::cost(double input_rate, double output_rate) const {
  if (input_rate < 0.0 || output_rate < 0.0) throw std::invalid_argument("negative token rate");
  return static_cast<double>(input_tokens) * input_rate +
         static_cast<double>(output_tokens) * output_rate;
}

namespace {

// Pulls the sole element out of a scalar-as-array field. Empty array means
// "not reported"; more than one element is a malformed answer.
struct ScalarPick {
  const json* value = nullptr;
  std::string error;
};

ScalarPick pick_scalar(const json& response, const std::string& key) {
  ScalarPick pick;
  const auto it = response.find(key);
  if (it == response.end() || !it->is_array()) {
    pick.error = "missing or non-array field";
    return pick;
  }
  if (it->empty()) return pick;
  if (it->size() > 1) {
    pick.error = "expected at most one value";
    return pick;
  }
  pick.value = &(*it)[0];
  return pick;
}

bool collect_strings(const json& response, const std::string& key, std::vector<std::string>& out,
                     std::vector<FieldIssue>& issues) {
  const auto it = response.find(key);
  if (it == response.end() || !it->is_array()) {
    issues.push_back({key, "missing or non-array field"});
    return false;
  }
  for (const auto& element : *it) {
    if (!element.is_string()) {
      issues.push_back({key, "non-string element"});
      return false;
    }
    out.push_back(element.get<std::string>());
  }
  return true;
}

void collect_labels(const json& response, const std::string& key, LabelKind kind,
                    std::vector<TaxonomyLabel>& out, std::vector<FieldIssue>& issues) {
  std::vector<std::string> tokens;
  if (!collect_strings(response, key, tokens, issues)) return;
  for (const auto& token : tokens) {
    auto label = parse_label_token(kind, token);
    if (!label) {
      issues.push_back({key, "malformed label: " + token});
      continue;
    }
    out.push_back(*label);
  }
}

}  // namespace

ParseOutcome parse_response(const json& response, const std::string& report_digest,
                            const Taxonomy& taxonomy) {
  ParseOutcome outcome;
  if (!response.is_object()) {
    outcome.issues.push_back({"", "response is not an object"});
    return outcome;
  }

  ReportRecord record;
  record.report_digest = report_digest;

  auto title = pick_scalar(response, "title");
  if (!title.error.empty())
    outcome.issues.push_back({"title", title.error});
  else if (title.value) {
    if (title.value->is_string())
      record.title = title.value->get<std::string>();
    else
      outcome.issues.push_back({"title", "not a string"});
  }

  auto vendor = pick_scalar(response, "vendor");
  if (!vendor.error.empty())
    outcome.issues.push_back({"vendor", vendor.error});
  else if (vendor.value) {
    if (vendor.value->is_string())
      record.vendor = vendor.value->get<std::string>();
    else
      outcome.issues.push_back({"vendor", "not a string"});
  }

  auto year = pick_scalar(response, "year");
  if (!year.error.empty())
    outcome.issues.push_back({"year", year.error});
  else if (year.value) {
    if (year.value->is_number_integer())
      record.year = year.value->get<int>();
    else
      outcome.issues.push_back({"year", "not an integer"});
  }

  auto month = pick_scalar(response, "month");
  if (!month.error.empty())
    outcome.issues.push_back({"month", month.error});
  else if (month.value) {
    if (month.value->is_string())
      record.month = month.value->get<std::string>();
    else
      outcome.issues.push_back({"month", "not a string"});
  }

  collect_labels(response, "report_type", LabelKind::report_type, record.report_type,
                 outcome.issues);
  collect_labels(response, "motivations", LabelKind::motivation, record.motivations,
                 outcome.issues);
  collect_labels(response, "sectors", LabelKind::sector, record.sectors, outcome.issues);
  collect_strings(response, "threat_actors", record.threat_actors, outcome.issues);
  collect_strings(response, "victims", record.victims, outcome.issues);
  collect_strings(response, "geographies", record.geographies, outcome.issues);
  collect_strings(response, "iocs", record.iocs, outcome.issues);
  collect_strings(response, "ttps", record.ttps, outcome.issues);

  auto duration = pick_scalar(response, "campaign_duration");
  if (!duration.error.empty())
    outcome.issues.push_back({"campaign_duration", duration.error});
  else if (duration.value) {
    const json& span = *duration.value;
    if (!span.is_object() || !span.contains("start") || !span.contains("end") ||
        !span["start"].is_string() || !span["end"].is_string()) {
      outcome.issues.push_back({"campaign_duration", "expected {start, end} strings"});
    } else {
      auto start = parse_year_month(span["start"].get<std::string>());
      auto end = parse_year_month(span["end"].get<std::string>());
      if (!start || !end)
        outcome.issues.push_back({"campaign_duration", "dates must be YYYY-MM"});
      else
        record.campaign_duration = CampaignDuration{*start, *end};
    }
  }

  if (!outcome.issues.empty()) return outcome;

  auto validation = validate_record(record, taxonomy);
  if (!validation.ok()) {
    for (const auto& violation : validation.violations)
      outcome.issues.push_back({violation.field, violation.rule});
    return outcome;
  }

  outcome.record = std::move(record);
  return outcome;
}

json render_response(const ReportRecord& record) {
  json response;
  response["title"] = record.title.empty() ? json::array() : json::array({record.title});
  response["vendor"] = record.vendor.empty() ? json::array() : json::array({record.vendor});
  response["year"] = record.year == 0 ? json::array() : json::array({record.year});
  response["month"] = record.month.empty() ? json::array() : json::array({record.month});

  auto labels_out = [](const std::vector<TaxonomyLabel>& labels) {
    json out = json::array();
    for (const auto& label : labels) out.push_back(label_token(label));
    return out;
  };
  response["report_type"] = labels_out(record.report_type);
  response["motivations"] = labels_out(record.motivations);
  response["sectors"] = labels_out(record.sectors);
  response["threat_actors"] = record.threat_actors;
  response["victims"] = record.victims;
  response["geographies"] = record.geographies;
  if (record.campaign_duration) {
    response["campaign_duration"] =
        json::array({json{{"start", format_year_month(record.campaign_duration->start)},
                          {"end", format_year_month(record.campaign_duration->end)}}});
  } else {
    response["campaign_duration"] = json::array();
  }
  response["iocs"] = record.iocs;
  response["ttps"] = record.ttps;
  return response;
}

namespace {

ExtractionResult finish_result(const BackendResult& raw, const Taxonomy& taxonomy) {
  ExtractionResult result;
  result.request_id = raw.request_id;
  result.usage = raw.usage;
  if (!raw.error.empty()) {
    result.error = raw.error;
    return result;
  }
  auto outcome = parse_response(raw.response, raw.request_id, taxonomy);
  result.record = std::move(outcome.record);
  result.issues = std::move(outcome.issues);
  return result;
}

std::vector<BackendResult> submit_with_retries(ExtractorBackend& backend,
                                               const ExtractionBatch& batch,
                                               const RunOptions& options) {
  int attempts = std::max(1, options.batch_attempts);
  auto delay = options.backoff_base;
  for (int attempt = 1;; ++attempt) {
    try {
      auto results = backend.submit(batch);
      if (results.size() != batch.requests.size())
        throw BackendError("backend returned " + std::to_string(results.size()) +
                               " results for " + std::to_string(batch.requests.size()) +
                               " requests",
                           false);
      return results;
    } catch (const BackendError& error) {
      if (!error.retryable() || attempt >= attempts) throw;
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

}  // namespace

std::vector<ExtractionResult> run_extraction(
    const ExtractionBatch& batch, ExtractorBackend& backend, const Taxonomy& taxonomy,
    const RunOptions& options, const std::function<void(const ExtractionResult&)>& on_result) {
  auto raw = submit_with_retries(backend, batch, options);

  // Index raw results by id so a reordering backend still lines up.
  std::map<std::string, BackendResult> by_id;
  for (auto& entry : raw) by_id[entry.request_id] = std::move(entry);

  std::vector<ExtractionResult> results(batch.requests.size());
  std::vector<std::size_t> retry_slots;
  std::vector<ExtractionRequest> retry_requests;

  for (std::size_t i = 0; i < batch.requests.size(); ++i) {
    const auto& request = batch.requests[i];
    auto it = by_id.find(request.request_id);
    if (it == by_id.end()) {
      results[i].request_id = request.request_id;
      results[i].error = "backend returned no result for request";
      continue;
    }
    results[i] = finish_result(it->second, taxonomy);
    bool failed = !it->second.error.empty() && it->second.retryable;
    if (failed && options.per_request_resubmits > 0) {
      retry_slots.push_back(i);
      retry_requests.push_back(request);
    }
  }

  if (!retry_requests.empty()) {
    try {
      auto second = submit_with_retries(backend, ExtractionBatch{retry_requests}, options);
      std::map<std::string, BackendResult> second_by_id;
      for (auto& entry : second) second_by_id[entry.request_id] = std::move(entry);
      for (std::size_t slot : retry_slots) {
        auto it = second_by_id.find(batch.requests[slot].request_id);
        if (it != second_by_id.end()) results[slot] = finish_result(it->second, taxonomy);
      }
    } catch (const BackendError&) {
      // First-round failures already recorded; the resubmission was best effort.
    }
  }

  if (on_result)
    for (const auto& result : results) on_result(result);
  return results;
}

CostEstimate estimate_cost(const std::vector<TokenUsage>& usages, double input_rate,
                           double output_rate) {
  if (input_rate < 0.0 || output_rate < 0.0) throw std::invalid_argument("negative token rate");
  CostEstimate estimate;
  if (usages.empty()) return estimate;

  std::vector<double> totals;
  totals.reserve(usages.size());
  for (const auto& usage : usages) {
    estimate.total_input_tokens += usage.input_tokens;
    estimate.total_output_tokens += usage.output_tokens;
    totals.push_back(static_cast<double>(usage.input_tokens + usage.output_tokens));
  }
  estimate.total_cost = static_cast<double>(estimate.total_input_tokens) * input_rate +
                        static_cast<double>(estimate.total_output_tokens) * output_rate;

  auto quartiles = analytics::quartiles(totals);
  estimate.q1_tokens = quartiles.q1;
  estimate.median_tokens = quartiles.median;
  estimate.q3_tokens = quartiles.q3;
  return estimate;
}

namespace {

json request_to_json(const ExtractionRequest& request) {
  return json{{"request_id", request.request_id},
              {"system_prompt", request.system_prompt},
              {"user_prompt", request.user_prompt},
              {"attachments", request.attachments},
              {"response_schema", request.response_schema},
              {"model_id", request.model_id},
              {"effort_level", request.effort_level}};
}

ExtractionRequest request_from_json(const json& value) {
  ExtractionRequest request;
  request.request_id = value.at("request_id").get<std::string>();
  request.system_prompt = value.at("system_prompt").get<std::string>();
  request.user_prompt = value.at("user_prompt").get<std::string>();
  request.attachments = value.at("attachments").get<std::vector<std::string>>();
  request.response_schema = value.at("response_schema");
  request.model_id = value.at("model_id").get<std::string>();
  request.effort_level = value.at("effort_level").get<std::string>();
  return request;
}

}  // namespace

std::string batch_to_ndjson(const ExtractionBatch& batch) {
  std::string out;
  for (const auto& request : batch.requests) {
    out += request_to_json(request).dump();
    out += '\n';
  }
  return out;
}

ExtractionBatch batch_from_ndjson(const std::string& text, std::size_t max_size) {
  std::vector<ExtractionRequest> requests;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (trim(line).empty() || line[0] == '#') continue;
    requests.push_back(request_from_json(json::parse(line)));
  }
  return make_batch(std::move(requests), max_size);
}

std::string result_to_json_line(const ExtractionResult& result) {
  json issues = json::array();
  for (const auto& issue : result.issues)
    issues.push_back(json{{"field", issue.field}, {"message", issue.message}});
  json value{{"request_id", result.request_id},
             {"record", result.record ? json(*result.record) : json(nullptr)},
             {"issues", issues},
             {"error", result.error},
             {"usage", json{{"input_tokens", result.usage.input_tokens},
                            {"output_tokens", result.usage.output_tokens}}}};
  return value.dump();
}

std::vector<ExtractionResult> results_from_ndjson(const std::string& text) {
  std::vector<ExtractionResult> results;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (trim(line).empty() || line[0] == '#') continue;
    json value = json::parse(line);
    ExtractionResult result;
    result.request_id = value.at("request_id").get<std::string>();
    if (!value.at("record").is_null()) result.record = value.at("record").get<ReportRecord>();
    for (const auto& issue : value.at("issues"))
      result.issues.push_back(
          {issue.at("field").get<std::string>(), issue.at("message").get<std::string>()});
    result.error = value.at("error").get<std::string>();
    result.usage.input_tokens = value.at("usage").at("input_tokens").get<long long>();
    result.usage.output_tokens = value.at("usage").at("output_tokens").get<long long>();
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace ctimeta::extraction
