#include "ctimeta/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <iterator>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "ctimeta/backends.hpp"
#include "ctimeta/csv.hpp"
#include "ctimeta/extraction.hpp"
#include "ctimeta/ingest.hpp"
#include "ctimeta/normalize.hpp"
#include "ctimeta/util.hpp"
#include "ctimeta/validation.hpp"

namespace ctimeta::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::ingest: return "ingest";
    case Command::extract: return "extract";
    case Command::normalize: return "normalize";
    case Command::validate: return "validate";
    case Command::analyze: return "analyze";
    case Command::export_data: return "export";
  }
  return "?";
}

std::optional<Command> command_from_string(std::string_view s) {
  if (s == "ingest") return Command::ingest;
  if (s == "extract") return Command::extract;
  if (s == "normalize") return Command::normalize;
  if (s == "validate") return Command::validate;
  if (s == "analyze") return Command::analyze;
  if (s == "export") return Command::export_data;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_dotted(const std::string& path) {
  auto parts = split(path, '.');
  for (const auto& part : parts)
    if (part.empty()) throw ConfigError("bad override path: " + path);
  return parts;
}

void apply_override(json& doc, const std::string& path, const std::string& raw_value) {
  json value;
  try {
    value = json::parse(raw_value);
  } catch (const json::parse_error&) {
    value = raw_value;  // unquoted strings are allowed on the command line
  }
  json* node = &doc;
  auto parts = split_dotted(path);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (!next.is_object() && !next.is_null())
      throw ConfigError("override path crosses a non-object: " + path);
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

// Dotted lookup into the config document; null when any segment is absent.
const json* find_node(const json& doc, const std::string& path) {
  const json* node = &doc;
  for (const auto& part : split(path, '.')) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

std::string require_string(const PipelineConfig& config, const std::string& key) {
  const json* node = find_node(config.doc, key);
  if (!node) throw ConfigError("missing config key: " + key);
  if (!node->is_string()) throw ConfigError("config key is not a string: " + key);
  return node->get<std::string>();
}

fs::path resolve_path(const PipelineConfig& config, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : config.base_dir / p;
}

fs::path require_existing(const PipelineConfig& config, const std::string& key) {
  auto p = resolve_path(config, require_string(config, key));
  if (!fs::exists(p)) throw ConfigError(key + " refers to a missing path: " + p.string());
  return p;
}

std::optional<fs::path> optional_existing(const PipelineConfig& config, const std::string& key) {
  if (!find_node(config.doc, key)) return std::nullopt;
  return require_existing(config, key);
}

long long config_int(const PipelineConfig& config, const std::string& key, long long fallback) {
  const json* node = find_node(config.doc, key);
  if (!node) return fallback;
  if (!node->is_number_integer()) throw ConfigError("config key is not an integer: " + key);
  return node->get<long long>();
}

double config_double(const PipelineConfig& config, const std::string& key, double fallback) {
  const json* node = find_node(config.doc, key);
  if (!node) return fallback;
  if (!node->is_number()) throw ConfigError("config key is not a number: " + key);
  return node->get<double>();
}

bool config_bool(const PipelineConfig& config, const std::string& key, bool fallback) {
  const json* node = find_node(config.doc, key);
  if (!node) return fallback;
  if (!node->is_boolean()) throw ConfigError("config key is not a boolean: " + key);
  return node->get<bool>();
}

std::vector<long long> config_int_list(const PipelineConfig& config, const std::string& key,
                                       std::vector<long long> fallback) {
  const json* node = find_node(config.doc, key);
  if (!node) return fallback;
  if (!node->is_array()) throw ConfigError("config key is not a list: " + key);
  std::vector<long long> out;
  for (const auto& element : *node) {
    if (!element.is_number_integer()) throw ConfigError("non-integer entry in " + key);
    out.push_back(element.get<long long>());
  }
  return out;
}

std::vector<std::string> config_string_list(const PipelineConfig& config, const std::string& key,
                                            std::vector<std::string> fallback) {
  const json* node = find_node(config.doc, key);
  if (!node) return fallback;
  if (!node->is_array()) throw ConfigError("config key is not a list: " + key);
  std::vector<std::string> out;
  for (const auto& element : *node) {
    if (!element.is_string()) throw ConfigError("non-string entry in " + key);
    out.push_back(element.get<std::string>());
  }
  return out;
}

json load_json_file(const fs::path& path, const std::string& what) {
  try {
    return json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(what + " (" + path.string() + "): " + e.what());
  }
}

}  // namespace

PipelineConfig config_from_json(json doc,
                                const std::vector<std::pair<std::string, std::string>>& overrides,
                                std::optional<std::uint64_t> seed_flag,
                                std::optional<fs::path> work_dir_flag) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& [path, value] : overrides) apply_override(doc, path, value);

  PipelineConfig config;
  config.base_dir = fs::current_path();

  if (seed_flag) {
    config.seed = *seed_flag;
  } else if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      throw ConfigError("seed must be a nonnegative integer");
    auto value = doc["seed"].get<std::int64_t>();
    if (value < 0) throw ConfigError("seed must be a nonnegative integer");
    config.seed = static_cast<std::uint64_t>(value);
  } else {
    throw ConfigError("no seed given: set \"seed\" in the config or pass --seed");
  }
  doc["seed"] = config.seed;

  if (work_dir_flag) {
    config.work_dir = *work_dir_flag;
  } else if (doc.contains("work_dir")) {
    if (!doc["work_dir"].is_string()) throw ConfigError("work_dir must be a string");
    config.work_dir = doc["work_dir"].get<std::string>();
  } else {
    config.work_dir = "work";
  }
  // The work directory is where artifacts land, not what they contain;
  // keeping it out of the digest lets two runs in different directories
  // produce byte-identical files.
  doc.erase("work_dir");

  config.doc = std::move(doc);
  config.digest = sha256_hex(config.doc.dump());
  return config;
}

PipelineConfig load_config(const fs::path& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides,
                           std::optional<std::uint64_t> seed_flag,
                           std::optional<fs::path> work_dir_flag) {
  json doc;
  try {
    doc = json::parse(read_file(file));
  } catch (const std::exception& e) {
    throw ConfigError("cannot load config " + file.string() + ": " + e.what());
  }
  auto config = config_from_json(std::move(doc), overrides, seed_flag, work_dir_flag);
  config.base_dir = fs::absolute(file).parent_path();
  return config;
}

std::string provenance_line(const std::string& operation, const std::string& parameters,
                            const std::string& config_digest, const std::string& corpus_digest,
                            std::uint64_t seed) {
  return "# op=" + operation + " params=" + (parameters.empty() ? "-" : parameters) +
         " config=" + config_digest + " corpus=" + corpus_digest +
         " seed=" + std::to_string(seed);
}

json provenance_object(const std::string& operation, const json& parameters,
                       const std::string& config_digest, const std::string& corpus_digest,
                       std::uint64_t seed) {
  return json{{"operation", operation},
              {"parameters", parameters},
              {"config_digest", config_digest},
              {"corpus_digest", corpus_digest},
              {"seed", seed}};
}

std::vector<SankeyFlow> export_sankey(const Corpus& corpus, long long min_motivation,
                                      long long min_sector) {
  std::map<std::string, long long> node_records;  // prefixed label -> records carrying it

  auto motivation_node = [](const std::string& l1) { return "motivation:" + l1; };
  auto sector_node = [](const std::string& l1) { return "sector:" + l1; };
  auto geography_node = [](const std::string& g) { return "geography:" + g; };

  std::map<std::pair<std::string, std::string>, long long> edges;

  for (const auto& record : corpus.records()) {
    std::set<std::string> motivations;
    for (const auto& label : record.motivations) motivations.insert(label.level1);
    std::set<std::string> sectors;
    for (const auto& label : record.sectors) sectors.insert(label.level1);
    std::set<std::string> geographies(record.geographies.begin(), record.geographies.end());
    geographies.erase("");

    for (const auto& m : motivations) ++node_records[motivation_node(m)];
    for (const auto& s : sectors) ++node_records[sector_node(s)];
    for (const auto& g : geographies) ++node_records[geography_node(g)];

    for (const auto& m : motivations)
      for (const auto& s : sectors) ++edges[{motivation_node(m), sector_node(s)}];
    for (const auto& m : motivations)
      for (const auto& g : geographies) ++edges[{motivation_node(m), geography_node(g)}];
    for (const auto& g : geographies)
      for (const auto& s : sectors) ++edges[{geography_node(g), sector_node(s)}];
  }

  auto included = [&](const std::string& node) {
    long long floor = node.rfind("motivation:", 0) == 0 ? min_motivation : min_sector;
    auto it = node_records.find(node);
    return it != node_records.end() && it->second > floor;
  };

  // Family order first (motivation->sector, motivation->geography,
  // geography->sector), then lexicographic within a family.
  auto family = [](const SankeyFlow& f) {
    if (f.source.rfind("motivation:", 0) == 0)
      return f.target.rfind("sector:", 0) == 0 ? 0 : 1;
    return 2;
  };

  std::vector<SankeyFlow> flows;
  for (const auto& [edge, weight] : edges) {
    if (!included(edge.first) || !included(edge.second)) continue;
    flows.push_back({edge.first, edge.second, weight});
  }
  std::sort(flows.begin(), flows.end(), [&](const SankeyFlow& a, const SankeyFlow& b) {
    int fa = family(a), fb = family(b);
    if (fa != fb) return fa < fb;
    if (a.source != b.source) return a.source < b.source;
    return a.target < b.target;
  });
  return flows;
}

std::string sankey_to_csv(const std::vector<SankeyFlow>& flows, const std::string& header_line) {
  std::string out;
  if (!header_line.empty()) out += header_line + "\n";
  out += csv::join_row({"source", "target", "weight"}) + "\n";
  for (const auto& flow : flows)
    out += csv::join_row({flow.source, flow.target, std::to_string(flow.weight)}) + "\n";
  return out;
}

std::vector<SankeyFlow> sankey_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  std::vector<SankeyFlow> flows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 && !rows[i].empty() && rows[i][0] == "source") continue;
    if (rows[i].size() != 3) throw std::runtime_error("sankey row needs 3 columns");
    flows.push_back({rows[i][0], rows[i][1], std::stoll(rows[i][2])});
  }
  return flows;
}

namespace {

std::string_view overlap_mode_name(analytics::OverlapMode mode) {
  return mode == analytics::OverlapMode::actors ? "actors" : "intelligence_points";
}

analytics::OverlapMode overlap_mode_from_name(const std::string& name) {
  if (name == "actors") return analytics::OverlapMode::actors;
  if (name == "intelligence_points") return analytics::OverlapMode::intelligence_points;
  throw std::runtime_error("unknown overlap mode: " + name);
}

analytics::CoverageTarget coverage_target_from_name(const std::string& name) {
  if (name == "actors") return analytics::CoverageTarget::actors;
  if (name == "geo_sector_pairs") return analytics::CoverageTarget::geo_sector_pairs;
  if (name == "intelligence_points") return analytics::CoverageTarget::intelligence_points;
  throw std::runtime_error("unknown coverage target: " + name);
}

}  // namespace

std::string matrix_to_csv(const analytics::OverlapMatrix& matrix, const std::string& header_line) {
  std::string out;
  if (!header_line.empty()) out += header_line + "\n";
  std::vector<std::string> header{std::string(overlap_mode_name(matrix.mode))};
  header.insert(header.end(), matrix.vendors.begin(), matrix.vendors.end());
  out += csv::join_row(header) + "\n";
  for (std::size_t i = 0; i < matrix.vendors.size(); ++i) {
    std::vector<std::string> row{matrix.vendors[i]};
    for (double value : matrix.values[i]) row.push_back(csv::format_double(value));
    out += csv::join_row(row) + "\n";
  }
  return out;
}

analytics::OverlapMatrix matrix_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw std::runtime_error("matrix CSV has no header row");
  analytics::OverlapMatrix matrix;
  matrix.mode = overlap_mode_from_name(rows[0].at(0));
  matrix.vendors.assign(rows[0].begin() + 1, rows[0].end());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != matrix.vendors.size() + 1)
      throw std::runtime_error("matrix row width mismatch");
    std::vector<double> values;
    for (std::size_t j = 1; j < rows[i].size(); ++j) values.push_back(csv::parse_double(rows[i][j]));
    matrix.values.push_back(std::move(values));
  }
  if (matrix.values.size() != matrix.vendors.size())
    throw std::runtime_error("matrix is not square");
  return matrix;
}

std::string curve_to_csv(const analytics::CoverageCurve& curve, const std::string& header_line) {
  std::string out;
  if (!header_line.empty()) out += header_line + "\n";
  out += csv::join_row({"n", "vendor", "covered", "fraction", "target", "universe"}) + "\n";
  for (const auto& point : curve.points) {
    out += csv::join_row({std::to_string(point.n), point.vendor, std::to_string(point.covered),
                          csv::format_double(point.fraction), std::string(to_string(curve.target)),
                          std::to_string(curve.universe)}) +
           "\n";
  }
  return out;
}

analytics::CoverageCurve curve_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  analytics::CoverageCurve curve;
  bool meta_set = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 && !rows[i].empty() && rows[i][0] == "n") continue;
    if (rows[i].size() != 6) throw std::runtime_error("curve row needs 6 columns");
    analytics::CoveragePoint point;
    point.n = static_cast<int>(std::stoll(rows[i][0]));
    point.vendor = rows[i][1];
    point.covered = std::stoll(rows[i][2]);
    point.fraction = csv::parse_double(rows[i][3]);
    if (!meta_set) {
      curve.target = coverage_target_from_name(rows[i][4]);
      curve.universe = std::stoll(rows[i][5]);
      meta_set = true;
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

std::string rollup_to_csv(const std::vector<analytics::YearlyRollup>& rollups,
                          const std::string& header_line) {
  std::set<std::string> type_keys;
  for (const auto& rollup : rollups)
    for (const auto& [key, count] : rollup.reports_by_type) {
      (void)count;
      type_keys.insert(key);
    }

  std::string out;
  if (!header_line.empty()) out += header_line + "\n";
  std::vector<std::string> header{"year",
                                  "total_reports",
                                  "distinct_vendors",
                                  "distinct_actors",
                                  "distinct_geographies",
                                  "distinct_sectors",
                                  "distinct_motivations",
                                  "reports_with_iocs",
                                  "reports_with_ttps"};
  for (const auto& key : type_keys) header.push_back("type_" + key);
  out += csv::join_row(header) + "\n";

  for (const auto& rollup : rollups) {
    std::vector<std::string> row{std::to_string(rollup.year),
                                 std::to_string(rollup.total_reports),
                                 std::to_string(rollup.distinct_vendors),
                                 std::to_string(rollup.distinct_actors),
                                 std::to_string(rollup.distinct_geographies),
                                 std::to_string(rollup.distinct_sectors),
                                 std::to_string(rollup.distinct_motivations),
                                 std::to_string(rollup.reports_with_iocs),
                                 std::to_string(rollup.reports_with_ttps)};
    for (const auto& key : type_keys) {
      auto it = rollup.reports_by_type.find(key);
      row.push_back(std::to_string(it == rollup.reports_by_type.end() ? 0 : it->second));
    }
    out += csv::join_row(row) + "\n";
  }
  return out;
}

std::vector<analytics::YearlyRollup> rollup_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw std::runtime_error("rollup CSV has no header row");
  const auto& header = rows[0];
  std::vector<analytics::YearlyRollup> rollups;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != header.size()) throw std::runtime_error("rollup row width mismatch");
    analytics::YearlyRollup rollup;
    for (std::size_t j = 0; j < header.size(); ++j) {
      long long value = std::stoll(rows[i][j]);
      const std::string& name = header[j];
      if (name == "year")
        rollup.year = static_cast<int>(value);
      else if (name == "total_reports")
        rollup.total_reports = value;
      else if (name == "distinct_vendors")
        rollup.distinct_vendors = value;
      else if (name == "distinct_actors")
        rollup.distinct_actors = value;
      else if (name == "distinct_geographies")
        rollup.distinct_geographies = value;
      else if (name == "distinct_sectors")
        rollup.distinct_sectors = value;
      else if (name == "distinct_motivations")
        rollup.distinct_motivations = value;
      else if (name == "reports_with_iocs")
        rollup.reports_with_iocs = value;
      else if (name == "reports_with_ttps")
        rollup.reports_with_ttps = value;
      else if (name.rfind("type_", 0) == 0 && value != 0)
        rollup.reports_by_type[name.substr(5)] = value;
      else if (name.rfind("type_", 0) != 0)
        throw std::runtime_error("unknown rollup column: " + name);
    }
    rollups.push_back(std::move(rollup));
  }
  return rollups;
}

namespace {

// ---- stage plumbing ------------------------------------------------------

void write_text_artifact(const fs::path& path, const std::string& content) {
  write_file_atomic(path, content);
}

void write_json_artifact(const fs::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

fs::path require_artifact(const PipelineConfig& config, const std::string& name,
                          const std::string& producer) {
  fs::path path = config.work_dir / name;
  if (!fs::exists(path))
    throw std::runtime_error("missing input: " + path.string() + " (run the " + producer +
                             " stage first)");
  return path;
}

std::map<std::string, std::string> load_source_map(const PipelineConfig& config) {
  auto doc = load_json_file(require_existing(config, "paths.source_map"), "source map");
  if (!doc.is_object()) throw ConfigError("source map must be a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [prefix, name] : doc.items()) {
    if (!name.is_string()) throw ConfigError("source map values must be strings");
    out[prefix] = name.get<std::string>();
  }
  return out;
}

struct RecordStore {
  std::vector<ReportRecord> records;
  Corpus corpus;
};

RecordStore load_store(const PipelineConfig& config, const std::string& name,
                       const std::string& producer) {
  auto path = require_artifact(config, name, producer);
  RecordStore store;
  store.records = parse_record_store(read_file(path));
  store.corpus = Corpus(store.records);
  return store;
}

void write_store(const fs::path& path, const std::vector<ReportRecord>& records,
                 const std::string& provenance) {
  write_text_artifact(path, provenance + "\n" + serialize_record_store(records));
}

void append_run_log(const PipelineConfig& config, Command command, const std::string& status,
                    const std::string& detail) {
  std::error_code ec;
  if (!fs::exists(config.work_dir, ec)) return;
  json line{{"command", std::string(to_string(command))},
            {"config_digest", config.digest},
            {"seed", config.seed},
            {"status", status},
            {"detail", detail}};
  std::ofstream out(config.work_dir / "run_log.ndjson", std::ios::app | std::ios::binary);
  out << line.dump() << '\n';
}

// ---- ingest --------------------------------------------------------------

void stage_ingest(const PipelineConfig& config) {
  auto root = require_existing(config, "paths.documents_root");
  auto source_map = load_source_map(config);
  json attributes = json::object();
  if (auto path = optional_existing(config, "paths.attributes"))
    attributes = load_json_file(*path, "document attributes");

  auto documents = ingest::collect_documents(root, source_map, attributes);
  auto deduped = ingest::dedupe_exact(documents);

  ingest::IngestManifest manifest;
  manifest.documents = std::move(deduped.survivors);
  manifest.dropped_exact = std::move(deduped.dropped);

  std::string document_digest = sha256_hex(json(manifest.documents).dump());
  json artifact = manifest;
  artifact["provenance"] = provenance_object(
      "ingest",
      json{{"collected", documents.size()}, {"dropped_exact", manifest.dropped_exact.size()}},
      config.digest, document_digest, config.seed);
  write_json_artifact(config.work_dir / "manifest.json", artifact);
}

// ---- extract ---------------------------------------------------------------

json backend_config(const PipelineConfig& config) {
  const json* node = find_node(config.doc, "extraction.backend");
  if (!node) throw ConfigError("missing config key: extraction.backend");
  if (!node->is_object() || !node->contains("kind"))
    throw ConfigError("extraction.backend must be an object with a \"kind\"");
  json backend = *node;
  if (backend["kind"] == "mock") {
    if (!backend.contains("root"))
      backend["root"] = require_existing(config, "paths.documents_root").string();
    else
      backend["root"] = resolve_path(config, backend["root"].get<std::string>()).string();
    if (!backend.contains("seed")) backend["seed"] = config.seed;
  }
  return backend;
}

void stage_extract(const PipelineConfig& config) {
  auto manifest = ingest::read_manifest(require_artifact(config, "manifest.json", "ingest"));
  auto taxonomy = load_taxonomy_file(require_existing(config, "paths.taxonomy"));
  auto templates = extraction::load_templates(require_existing(config, "paths.templates_dir"));

  auto backend = extraction::make_backend(backend_config(config));

  auto batch_size =
      static_cast<std::size_t>(config_int(config, "extraction.batch_size",
                                          static_cast<long long>(extraction::kDefaultBatchLimit)));
  if (batch_size == 0) throw ConfigError("extraction.batch_size must be positive");

  extraction::RunOptions options;
  options.batch_attempts = static_cast<int>(config_int(config, "extraction.batch_attempts", 3));
  options.per_request_resubmits =
      static_cast<int>(config_int(config, "extraction.per_request_resubmits", 1));
  options.backoff_base =
      std::chrono::milliseconds(config_int(config, "extraction.backoff_ms", 250));

  std::vector<extraction::ExtractionRequest> requests;
  for (const auto& document : manifest.documents)
    requests.push_back(extraction::build_request(document, taxonomy, templates,
                                                 backend->model_id(), backend->effort_level()));

  std::string request_header = provenance_line(
      "extract-batches", "requests=" + std::to_string(requests.size()), config.digest, "",
      config.seed);

  // Results stream into a .partial file that is renamed only after the last
  // batch, so an interrupted run never leaves an artifact a later stage
  // would accept.
  fs::path results_path = config.work_dir / "results.ndjson";
  fs::path partial_path = config.work_dir / "results.ndjson.partial";
  std::ofstream results_out(partial_path, std::ios::binary | std::ios::trunc);
  if (!results_out) throw std::runtime_error("cannot open " + partial_path.string());
  results_out << provenance_line("extract-results", "-", config.digest, "", config.seed) << '\n';

  std::string batches_text = request_header + "\n";
  std::vector<extraction::ExtractionResult> results;
  for (std::size_t offset = 0; offset < requests.size(); offset += batch_size) {
    auto last = std::min(offset + batch_size, requests.size());
    auto batch = extraction::make_batch(
        std::vector<extraction::ExtractionRequest>(requests.begin() + offset,
                                                   requests.begin() + last),
        batch_size);
    batches_text += extraction::batch_to_ndjson(batch);
    auto batch_results = extraction::run_extraction(
        batch, *backend, taxonomy, options, [&](const extraction::ExtractionResult& result) {
          results_out << extraction::result_to_json_line(result) << '\n';
          results_out.flush();
        });
    results.insert(results.end(), std::make_move_iterator(batch_results.begin()),
                   std::make_move_iterator(batch_results.end()));
  }
  results_out.close();
  write_text_artifact(config.work_dir / "batches.ndjson", batches_text);
  fs::rename(partial_path, results_path);

  std::vector<ReportRecord> records;
  std::vector<extraction::TokenUsage> usages;
  long long failures = 0;
  for (const auto& result : results) {
    usages.push_back(result.usage);
    if (result.record)
      records.push_back(*result.record);
    else
      ++failures;
  }

  Corpus corpus(records);
  write_store(config.work_dir / "records.ndjson", records,
              provenance_line("extract-records", "records=" + std::to_string(records.size()),
                              config.digest, corpus.digest(), config.seed));

  auto estimate = extraction::estimate_cost(usages, config_double(config, "extraction.input_rate", 0.0),
                                            config_double(config, "extraction.output_rate", 0.0));
  json summary{{"requests", requests.size()},
               {"records", records.size()},
               {"failures", failures},
               {"total_input_tokens", estimate.total_input_tokens},
               {"total_output_tokens", estimate.total_output_tokens},
               {"total_cost", estimate.total_cost},
               {"tokens_per_request_q1", estimate.q1_tokens},
               {"tokens_per_request_median", estimate.median_tokens},
               {"tokens_per_request_q3", estimate.q3_tokens}};
  summary["provenance"] = provenance_object("extract", json{{"batch_size", batch_size}},
                                            config.digest, corpus.digest(), config.seed);
  write_json_artifact(config.work_dir / "extract_summary.json", summary);
}

// ---- normalize -------------------------------------------------------------

std::vector<std::string> dedupe_keep_order(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& value : values) {
    if (value.empty()) continue;
    if (seen.insert(value).second) out.push_back(value);
  }
  return out;
}

void stage_normalize(const PipelineConfig& config) {
  auto store = load_store(config, "records.ndjson", "extract");

  auto geo_map =
      normalization::load_canonical_map_file(require_existing(config, "paths.geography_map"));
  auto vendor_map =
      normalization::load_canonical_map_file(require_existing(config, "paths.vendor_map"));
  auto scheme =
      normalization::load_naming_scheme_file(require_existing(config, "paths.naming_scheme"));

  std::vector<normalization::AliasCatalog> catalogs;
  for (const auto& entry : config_string_list(config, "paths.alias_catalogs", {})) {
    auto path = resolve_path(config, entry);
    if (!fs::exists(path))
      throw ConfigError("paths.alias_catalogs refers to a missing file: " + path.string());
    catalogs.push_back(normalization::load_alias_catalog_file(path));
  }
  int consensus_k = static_cast<int>(config_int(config, "normalization.consensus_k", 3));
  normalization::AliasConsensus consensus;
  if (!catalogs.empty()) {
    try {
      consensus = normalization::build_alias_consensus(catalogs, consensus_k, scheme);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("alias consensus: ") + e.what());
    }
  }

  normalization::AuditLog audit;
  std::vector<ReportRecord> normalized = store.records;
  for (auto& record : normalized) {
    record.vendor = normalization::normalize_vendor(record.vendor, vendor_map, &audit);
    std::vector<std::string> geographies;
    for (const auto& g : record.geographies)
      geographies.push_back(normalization::normalize_geography(g, geo_map, &audit));
    record.geographies = dedupe_keep_order(geographies);

    std::vector<std::string> actors;
    for (const auto& raw : record.threat_actors)
      actors.push_back(normalization::canonicalize_actor(raw, consensus, scheme, &audit));
    record.threat_actors = dedupe_keep_order(actors);

    std::vector<std::string> victims;
    for (const auto& v : record.victims) victims.push_back(trim(v));
    record.victims = dedupe_keep_order(victims);
    record.iocs = dedupe_keep_order(record.iocs);
    record.ttps = dedupe_keep_order(record.ttps);
  }

  // Tuple duplicates only become visible once titles, vendors and actors
  // are canonical, so the second dedup stage runs here, not at ingest.
  auto groups = ingest::group_tuple_duplicates(normalized);
  std::vector<ingest::ResolutionRule> rules;
  if (auto policy = optional_existing(config, "paths.resolution_policy"))
    rules = ingest::parse_resolution_policy(load_json_file(*policy, "resolution policy"));

  std::map<std::string, bool> images;
  fs::path manifest_path = config.work_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    auto manifest = ingest::read_manifest(manifest_path);
    for (const auto& document : manifest.documents)
      images[document.digest] = document.has_embedded_images;
  }

  auto resolved = ingest::resolve_duplicates(normalized, std::move(groups), rules, images);

  Corpus corpus(resolved.records);
  write_store(config.work_dir / "normalized.ndjson", resolved.records,
              provenance_line("normalize",
                              "records=" + std::to_string(resolved.records.size()) +
                                  ";dropped=" + std::to_string(resolved.dropped.size()) +
                                  ";consensus_k=" + std::to_string(consensus_k),
                              config.digest, corpus.digest(), config.seed));

  write_text_artifact(config.work_dir / "audit_log.ndjson",
                      provenance_line("normalize-audit", "-", config.digest, corpus.digest(),
                                      config.seed) +
                          "\n" + audit.to_ndjson());

  ingest::IngestManifest dedup;
  dedup.tuple_groups = std::move(resolved.groups);
  dedup.dropped_tuple = std::move(resolved.dropped);
  json dedup_artifact = dedup;
  dedup_artifact.erase("documents");
  dedup_artifact.erase("dropped_exact");
  dedup_artifact["provenance"] = provenance_object(
      "normalize-dedup", json{{"groups", dedup.tuple_groups.size()}}, config.digest,
      corpus.digest(), config.seed);
  write_json_artifact(config.work_dir / "dedup.json", dedup_artifact);
}

// ---- validate --------------------------------------------------------------

std::map<std::string, std::string> primary_types(const Corpus& corpus) {
  std::map<std::string, std::string> types;
  for (const auto& record : corpus.records())
    if (!record.report_type.empty()) types[record.report_digest] = record.report_type.front().level1;
  return types;
}

void stage_validate(const PipelineConfig& config) {
  auto store = load_store(config, "normalized.ndjson", "normalize");

  int total = static_cast<int>(config_int(config, "validation.sample_total", 100));
  int floor = static_cast<int>(config_int(config, "validation.sample_floor", 5));
  auto sample = validation::stratified_sample(store.corpus, total, floor, config.seed);

  std::string sample_csv =
      provenance_line("validate-sample",
                      "total=" + std::to_string(total) + ";floor=" + std::to_string(floor),
                      config.digest, store.corpus.digest(), config.seed) +
      "\n" + csv::join_row({"report_type", "digest"}) + "\n";
  for (const auto& [type, digests] : sample.by_type)
    for (const auto& digest : digests) sample_csv += csv::join_row({type, digest}) + "\n";
  write_text_artifact(config.work_dir / "sample.csv", sample_csv);

  json summary;
  json allocation = json::object();
  for (const auto& [type, count] : sample.allocation) allocation[type] = count;
  summary["sample_allocation"] = allocation;

  if (auto path = optional_existing(config, "paths.judgments")) {
    auto judgments = validation::load_judgments_file(*path);
    auto matrix = validation::score_report(judgments, primary_types(store.corpus));
    for (const auto& aggregation : {std::string("micro"), std::string("macro")}) {
      auto header = provenance_line("validate-scores-" + aggregation,
                                    "judgments=" + std::to_string(judgments.size()), config.digest,
                                    store.corpus.digest(), config.seed);
      write_text_artifact(config.work_dir / ("scores_" + aggregation + ".csv"),
                          validation::score_matrix_to_csv(matrix, aggregation, header));
    }

    // Cells where a zero denominator forced the defined-score convention
    // (1.0 when nothing was expected and nothing produced, else 0).
    json convention_cells = json::array();
    for (const auto& aggregation : {std::string("micro"), std::string("macro")}) {
      const auto& table = aggregation == "micro" ? matrix.micro : matrix.macro;
      for (const auto& [field, by_type] : table)
        for (const auto& [type, score] : by_type) {
          if (!score.precision_by_convention && !score.recall_by_convention) continue;
          convention_cells.push_back(json{{"aggregation", aggregation},
                                          {"field", field},
                                          {"type", type},
                                          {"precision_by_convention", score.precision_by_convention},
                                          {"recall_by_convention", score.recall_by_convention}});
        }
    }
    summary["zero_denominator_cells"] = convention_cells;
    summary["judgments"] = judgments.size();
  }

  if (auto path = optional_existing(config, "paths.ratings")) {
    auto rows = csv::parse(read_file(*path));
    std::vector<std::string> rater_a, rater_b;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == 0 && !rows[i].empty() && rows[i][0] == "item") continue;
      if (rows[i].size() != 3) throw std::runtime_error("ratings row needs 3 columns");
      rater_a.push_back(rows[i][1]);
      rater_b.push_back(rows[i][2]);
    }
    try {
      summary["kappa"] = validation::cohens_kappa(rater_a, rater_b);
    } catch (const std::exception& e) {
      summary["kappa"] = nullptr;
      summary["kappa_error"] = e.what();
    }
  }

  if (auto path = optional_existing(config, "paths.stability_runs")) {
    auto runs = validation::load_stability_runs_file(*path);
    summary["stability_entropy_bits"] = validation::corpus_stability_entropy(runs);
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& run : runs) cells.insert({run.report_digest, run.field});
    summary["stability_cells"] = cells.size();
  }

  summary["provenance"] = provenance_object(
      "validate", json{{"sample_total", total}, {"sample_floor", floor}}, config.digest,
      store.corpus.digest(), config.seed);
  write_json_artifact(config.work_dir / "validation_summary.json", summary);
}

// ---- analyze ---------------------------------------------------------------

std::string slugify(const std::string& name) {
  std::string out;
  for (char c : to_lower(name)) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::string bucket_csv(const analytics::BucketTable& table, const std::string& dimension_name) {
  std::string out;
  for (const auto& bucket : table.buckets)
    out += csv::join_row({dimension_name, bucket.label, std::to_string(bucket.count),
                          csv::format_double(bucket.percent),
                          std::to_string(table.population)}) +
           "\n";
  return out;
}

void stage_analyze(const PipelineConfig& config) {
  auto store = load_store(config, "normalized.ndjson", "normalize");
  const Corpus& corpus = store.corpus;

  // Intelligence-oriented analyses can be restricted to the campaign-core
  // report classes; counting analyses always see the whole corpus.
  bool core_only = config_bool(config, "analytics.campaign_core_only", false);
  Corpus core_corpus = core_only ? filter_campaign_core(corpus) : corpus;
  const Corpus& intel_corpus = core_only ? core_corpus : corpus;

  auto dims = config_bool(config, "analytics.include_iocs", false)
                  ? analytics::extended_dimensions()
                  : analytics::default_dimensions();

  fs::path dir = config.work_dir / "analytics";
  fs::create_directories(dir);

  const std::string& corpus_digest = corpus.digest();
  auto header = [&](const std::string& op, const std::string& params) {
    return provenance_line(op, params, config.digest, corpus_digest, config.seed);
  };

  // Yearly rollup and the correlations between report volume and the other
  // yearly series.
  auto rollups = analytics::yearly_rollup(corpus);
  write_text_artifact(dir / "rollup.csv",
                      rollup_to_csv(rollups, header("yearly-rollup", "")));

  {
    std::vector<double> volume;
    for (const auto& rollup : rollups) volume.push_back(static_cast<double>(rollup.total_reports));
    std::vector<std::pair<std::string, std::function<double(const analytics::YearlyRollup&)>>>
        series{{"distinct_vendors", [](const auto& r) { return double(r.distinct_vendors); }},
               {"distinct_actors", [](const auto& r) { return double(r.distinct_actors); }},
               {"distinct_geographies", [](const auto& r) { return double(r.distinct_geographies); }},
               {"distinct_sectors", [](const auto& r) { return double(r.distinct_sectors); }},
               {"distinct_motivations", [](const auto& r) { return double(r.distinct_motivations); }},
               {"reports_with_iocs", [](const auto& r) { return double(r.reports_with_iocs); }},
               {"reports_with_ttps", [](const auto& r) { return double(r.reports_with_ttps); }}};
    std::string out = header("correlations", "x=total_reports_per_year") + "\n" +
                      csv::join_row({"series", "r", "status"}) + "\n";
    for (const auto& [name, get] : series) {
      std::vector<double> values;
      for (const auto& rollup : rollups) values.push_back(get(rollup));
      std::string r, status;
      try {
        r = csv::format_double(analytics::pearson_correlation(volume, values));
        status = "ok";
      } catch (const std::exception& e) {
        status = e.what();
      }
      out += csv::join_row({name, r, status}) + "\n";
    }
    write_text_artifact(dir / "correlations.csv", out);
  }

  // Characterization buckets for actors and vendors.
  {
    auto actor_thresholds = config_int_list(config, "analytics.actor_bucket_thresholds", {5, 10});
    auto vendor_thresholds =
        config_int_list(config, "analytics.vendor_bucket_thresholds", {10, 100});
    const std::string columns = csv::join_row({"dimension", "bucket", "count", "percent",
                                               "population"});

    std::string actors_out = header("actor-buckets", "") + "\n" + columns + "\n";
    for (auto dimension : {analytics::CountDimension::reports,
                           analytics::CountDimension::motivations,
                           analytics::CountDimension::geographies,
                           analytics::CountDimension::sectors}) {
      static const char* names[] = {"reports", "actors", "motivations", "geographies", "sectors"};
      actors_out += bucket_csv(analytics::bucket_table(corpus, analytics::EntityKind::actor,
                                                       dimension, actor_thresholds),
                               names[static_cast<int>(dimension)]);
    }
    write_text_artifact(dir / "buckets_actors.csv", actors_out);

    std::string vendors_out = header("vendor-buckets", "") + "\n" + columns + "\n";
    for (auto dimension : {analytics::CountDimension::reports, analytics::CountDimension::actors,
                           analytics::CountDimension::motivations,
                           analytics::CountDimension::geographies,
                           analytics::CountDimension::sectors}) {
      static const char* names[] = {"reports", "actors", "motivations", "geographies", "sectors"};
      vendors_out += bucket_csv(analytics::bucket_table(corpus, analytics::EntityKind::vendor,
                                                        dimension, vendor_thresholds),
                                names[static_cast<int>(dimension)]);
    }
    write_text_artifact(dir / "buckets_vendors.csv", vendors_out);
  }

  // Per-geography share tables for the configured categories.
  if (const json* shares = find_node(config.doc, "analytics.shares")) {
    if (!shares->is_array()) throw ConfigError("analytics.shares must be a list");
    long long min_attacks = config_int(config, "analytics.share_min_attacks", 10);
    for (const auto& entry : *shares) {
      if (!entry.is_object() || !entry.contains("kind") || !entry.contains("category"))
        throw ConfigError("analytics.shares entries need kind and category");
      auto kind_name = entry["kind"].get<std::string>();
      auto kind = label_kind_from_string(kind_name);
      if (!kind || *kind == LabelKind::report_type)
        throw ConfigError("share kind must be motivation or sector");
      auto category = entry["category"].get<std::string>();

      auto stats = analytics::share_stats(corpus, *kind, category, min_attacks);
      std::string out = header("share-stats", "kind=" + kind_name + ";category=" + category +
                                                  ";min_attacks=" + std::to_string(min_attacks)) +
                        "\n";
      std::string outliers;
      for (const auto& name : stats.outliers) {
        if (!outliers.empty()) outliers += "|";
        outliers += name;
      }
      out += "# stats mean=" + csv::format_double(stats.mean) +
             " stddev=" + csv::format_double(stats.stddev) +
             " q1=" + csv::format_double(stats.quartiles.q1) +
             " median=" + csv::format_double(stats.quartiles.median) +
             " q3=" + csv::format_double(stats.quartiles.q3) + " outliers=" + outliers + "\n";
      out += csv::join_row({"geography", "category_attacks", "total_attacks", "share", "outlier"}) +
             "\n";
      for (const auto& row : stats.rows)
        out += csv::join_row({row.geography, std::to_string(row.category_attacks),
                              std::to_string(row.total_attacks), csv::format_double(row.share),
                              row.outlier ? "true" : "false"}) +
               "\n";
      write_text_artifact(dir / ("shares_" + kind_name + "_" + slugify(category) + ".csv"), out);
    }
  }

  // Vendor overlap, in both modes, plus the top-N agreement series.
  {
    int top_k = static_cast<int>(config_int(config, "analytics.overlap_top_k", 30));
    write_text_artifact(
        dir / "overlap_actors.csv",
        matrix_to_csv(analytics::overlap_matrix(intel_corpus, top_k,
                                                analytics::OverlapMode::actors, dims),
                      header("overlap-matrix", "mode=actors;top_k=" + std::to_string(top_k))));
    write_text_artifact(
        dir / "overlap_points.csv",
        matrix_to_csv(
            analytics::overlap_matrix(intel_corpus, top_k,
                                      analytics::OverlapMode::intelligence_points, dims),
            header("overlap-matrix", "mode=intelligence_points;top_k=" + std::to_string(top_k))));

    int n_min = static_cast<int>(config_int(config, "analytics.topn_min", 2));
    int n_max = static_cast<int>(config_int(config, "analytics.topn_max", 30));
    auto series = analytics::average_topn_overlap(intel_corpus, n_min, n_max, dims);
    std::string out = header("topn-overlap",
                             "n_min=" + std::to_string(n_min) + ";n_max=" + std::to_string(n_max)) +
                      "\n" +
                      csv::join_row({"n", "mean_pairwise_jaccard", "pairs_with_shared_actors",
                                     "shared_actors_union", "shared_actors_all"}) +
                      "\n";
    for (const auto& row : series)
      out += csv::join_row({std::to_string(row.n), csv::format_double(row.mean_pairwise_jaccard),
                            std::to_string(row.pairs_with_shared_actors),
                            std::to_string(row.shared_actors_union),
                            std::to_string(row.shared_actors_all)}) +
             "\n";
    write_text_artifact(dir / "topn_overlap.csv", out);
  }

  // Cumulative coverage curves over the vendor ranking.
  for (auto [target, name] :
       {std::pair{analytics::CoverageTarget::actors, "coverage_actors.csv"},
        std::pair{analytics::CoverageTarget::geo_sector_pairs, "coverage_geo_sector.csv"},
        std::pair{analytics::CoverageTarget::intelligence_points, "coverage_points.csv"}}) {
    auto curve = analytics::coverage_curve(intel_corpus, target, dims);
    write_text_artifact(dir / name,
                        curve_to_csv(curve, header("coverage-curve",
                                                   "target=" + std::string(to_string(target)))));
  }

  // Greedy source selection for the configured actors.
  {
    int n_max = static_cast<int>(config_int(config, "analytics.greedy_n_max", 5));
    for (const auto& actor : config_string_list(config, "analytics.greedy_actors", {})) {
      auto greedy = analytics::greedy_marginal_coverage(intel_corpus, actor, n_max, dims);
      std::string out = header("greedy-coverage", "actor=" + actor + ";n_max=" +
                                                      std::to_string(n_max) + ";universe=" +
                                                      std::to_string(greedy.universe)) +
                        "\n" +
                        csv::join_row({"n", "vendor", "newly_covered", "covered", "fraction"}) +
                        "\n";
      for (const auto& step : greedy.steps)
        out += csv::join_row({std::to_string(step.n), step.vendor,
                              std::to_string(step.newly_covered), std::to_string(step.covered),
                              csv::format_double(step.fraction)}) +
               "\n";
      write_text_artifact(dir / ("greedy_" + slugify(actor) + ".csv"), out);
    }
  }

  // External tracker audit, when claim counts are supplied.
  if (auto path = optional_existing(config, "paths.audit_counts")) {
    auto doc = load_json_file(*path, "audit counts");
    if (!doc.is_array()) throw ConfigError("audit counts must be a JSON array");
    std::vector<analytics::AuditInput> inputs;
    for (const auto& entry : doc)
      inputs.push_back({entry.at("vendor").get<std::string>(),
                        entry.at("entries").get<long long>(),
                        entry.at("reports").get<long long>(),
                        entry.at("in_corpus").get<long long>()});
    auto audit = analytics::coverage_audit(inputs);
    std::string out = header("coverage-audit", "") + "\n" +
                      csv::join_row({"vendor", "entries", "reports", "in_corpus", "percent"}) +
                      "\n";
    for (const auto& row : audit.rows)
      out += csv::join_row({row.vendor, std::to_string(row.entries), std::to_string(row.reports),
                            std::to_string(row.in_corpus), csv::format_double(row.percent)}) +
             "\n";
    out += csv::join_row({"All", std::to_string(audit.total_entries),
                          std::to_string(audit.total_reports),
                          std::to_string(audit.total_in_corpus),
                          csv::format_double(audit.overall_percent)}) +
           "\n";
    write_text_artifact(dir / "audit.csv", out);
  }
}

// ---- export ----------------------------------------------------------------

void stage_export(const PipelineConfig& config) {
  auto store = load_store(config, "normalized.ndjson", "normalize");

  long long min_motivation = config_int(config, "export.sankey_min_motivation", 50);
  long long min_sector = config_int(config, "export.sankey_min_sector", 150);
  auto flows = export_sankey(store.corpus, min_motivation, min_sector);

  fs::path dir = config.work_dir / "export";
  fs::create_directories(dir);
  write_text_artifact(
      dir / "sankey.csv",
      sankey_to_csv(flows, provenance_line("export-sankey",
                                           "min_motivation=" + std::to_string(min_motivation) +
                                               ";min_sector=" + std::to_string(min_sector),
                                           config.digest, store.corpus.digest(), config.seed)));
}

}  // namespace

void run_ingest(const PipelineConfig& config) { stage_ingest(config); }
void run_extract(const PipelineConfig& config) { stage_extract(config); }
void run_normalize(const PipelineConfig& config) { stage_normalize(config); }
void run_validate(const PipelineConfig& config) { stage_validate(config); }
void run_analyze(const PipelineConfig& config) { stage_analyze(config); }
void run_export(const PipelineConfig& config) { stage_export(config); }

int run(Command command, const PipelineConfig& config, std::ostream& err) {
  try {
    std::filesystem::create_directories(config.work_dir);
    switch (command) {
      case Command::ingest: stage_ingest(config); break;
      case Command::extract: stage_extract(config); break;
      case Command::normalize: stage_normalize(config); break;
      case Command::validate: stage_validate(config); break;
      case Command::analyze: stage_analyze(config); break;
      case Command::export_data: stage_export(config); break;
    }
    append_run_log(config, command, "ok", "");
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    append_run_log(config, command, "config-error", e.what());
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    append_run_log(config, command, "error", e.what());
    return 1;
  }
}

}  // namespace ctimeta::pipeline
