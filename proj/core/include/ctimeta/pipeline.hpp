#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctimeta/analytics.hpp"
#include "ctimeta/corpus.hpp"

namespace ctimeta::pipeline {

enum class Command { ingest, extract, normalize, validate, analyze, export_data };

std::string_view to_string(Command c);
std::optional<Command> command_from_string(std::string_view s);

// A malformed or incomplete configuration. Mapped to exit code 2, while
// every other failure (missing prior-stage artifact, IO, backend) is a
// hard error with exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

// Effective run settings: the config document with flag overrides already
// applied. The digest identifies this exact document, so any two runs with
// equal digest, corpus digest and seed must produce identical bytes.
struct PipelineConfig {
  nlohmann::json doc;
  std::filesystem::path base_dir;  // relative config paths resolve against this
  std::filesystem::path work_dir;
  std::uint64_t seed = 0;
  std::string digest;
};

// Overrides are dotted-path assignments ("extraction.batch_size=250");
// values parse as JSON when possible and fall back to plain strings. The
// seed must come from the file or the flag, never from ambient entropy.
PipelineConfig load_config(const std::filesystem::path& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {},
                           std::optional<std::uint64_t> seed_flag = std::nullopt,
                           std::optional<std::filesystem::path> work_dir_flag = std::nullopt);

PipelineConfig config_from_json(nlohmann::json doc,
                                const std::vector<std::pair<std::string, std::string>>& overrides = {},
                                std::optional<std::uint64_t> seed_flag = std::nullopt,
                                std::optional<std::filesystem::path> work_dir_flag = std::nullopt);

// One comment line carrying the full reproducibility triple; the first
// line of every CSV artifact and the "provenance" object of JSON ones.
std::string provenance_line(const std::string& operation, const std::string& parameters,
                            const std::string& config_digest, const std::string& corpus_digest,
                            std::uint64_t seed);
nlohmann::json provenance_object(const std::string& operation, const nlohmann::json& parameters,
                                 const std::string& config_digest,
                                 const std::string& corpus_digest, std::uint64_t seed);

struct SankeyFlow {
  std::string source;
  std::string target;
  long long weight = 0;

  bool operator==(const SankeyFlow&) const = default;
};

// Flow triples for the motivation/victimology diagram: motivation->sector,
// motivation->geography and geography->sector edges, weighted by record
// count. A node participates only when strictly more records carry it than
// the matching floor (min_motivation for motivations, min_sector for
// sectors and geographies). Node labels are prefixed with their kind so
// same-spelled labels from different axes stay distinct.
std::vector<SankeyFlow> export_sankey(const Corpus& corpus, long long min_motivation = 50,
                                      long long min_sector = 150);

std::string sankey_to_csv(const std::vector<SankeyFlow>& flows, const std::string& header_line);
std::vector<SankeyFlow> sankey_from_csv(const std::string& text);

// CSV forms for the analytics artifacts. Values are written with shortest
// round-trip formatting, so parse(render(x)) recovers x exactly.
std::string matrix_to_csv(const analytics::OverlapMatrix& matrix, const std::string& header_line);
analytics::OverlapMatrix matrix_from_csv(const std::string& text);

std::string curve_to_csv(const analytics::CoverageCurve& curve, const std::string& header_line);
analytics::CoverageCurve curve_from_csv(const std::string& text);

std::string rollup_to_csv(const std::vector<analytics::YearlyRollup>& rollups,
                          const std::string& header_line);
std::vector<analytics::YearlyRollup> rollup_from_csv(const std::string& text);

// Stage runners. Each throws ConfigError for configuration problems and
// std::runtime_error for missing prior-stage artifacts or IO failures;
// artifacts are written atomically into the work directory.
void run_ingest(const PipelineConfig& config);
void run_extract(const PipelineConfig& config);
void run_normalize(const PipelineConfig& config);
void run_validate(const PipelineConfig& config);
void run_analyze(const PipelineConfig& config);
void run_export(const PipelineConfig& config);

// Dispatches one stage and maps failures to exit codes: 0 ok, 1 hard
// error, 2 config error. Diagnostics go to `err`.
int run(Command command, const PipelineConfig& config, std::ostream& err);

}  // namespace ctimeta::pipeline
