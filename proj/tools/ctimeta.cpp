// Pipeline driver: one subcommand per stage, all settings in a JSON config
// file, flags only for the seed, the work directory and ad-hoc overrides.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctimeta/pipeline.hpp"

namespace {

struct StageArgs {
  std::string config_path;
  std::string work_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
};

void add_stage_options(CLI::App* sub, StageArgs& args) {
  sub->add_option("-c,--config", args.config_path, "pipeline config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "seed for randomized steps");
  sub->add_option("--work-dir", args.work_dir, "artifact directory");
  sub->add_option("--set", args.overrides,
                  "override a config entry, dotted.path=value (value parsed as JSON)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTI report corpus pipeline"};
  app.require_subcommand(1);

  StageArgs args;
  const std::pair<const char*, const char*> stages[] = {
      {"ingest", "collect documents and drop byte-identical copies"},
      {"extract", "run schema-constrained extraction over the manifest"},
      {"normalize", "canonicalize entities and resolve tuple duplicates"},
      {"validate", "draw the review sample and score judgments"},
      {"analyze", "compute rollups, overlap, coverage and share tables"},
      {"export", "emit plot-ready flow data"},
  };
  for (const auto& [name, description] : stages)
    add_stage_options(app.add_subcommand(name, description), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto* sub = app.get_subcommands().front();
  auto command = ctimeta::pipeline::command_from_string(sub->get_name());
  if (!command) {
    std::cerr << "unknown command: " << sub->get_name() << '\n';
    return 2;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& entry : args.overrides) {
    auto pos = entry.find('=');
    if (pos == std::string::npos || pos == 0) {
      std::cerr << "config error: --set expects dotted.path=value, got: " << entry << '\n';
      return 2;
    }
    overrides.emplace_back(entry.substr(0, pos), entry.substr(pos + 1));
  }

  std::optional<std::uint64_t> seed;
  if (sub->count("--seed") > 0) seed = args.seed;
  std::optional<std::filesystem::path> work_dir;
  if (sub->count("--work-dir") > 0) work_dir = args.work_dir;

  ctimeta::pipeline::PipelineConfig config;
  try {
    config = ctimeta::pipeline::load_config(args.config_path, overrides, seed, work_dir);
  } catch (const ctimeta::pipeline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  return ctimeta::pipeline::run(*command, config, std::cerr);
}
