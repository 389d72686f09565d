// floq — declarative runner for the transmon-chain simulator

#include "floq/device.hpp"
#include "floq/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

// 0: success, 1: config error, 2: runtime error
int run_command(const std::string& config_arg, const std::string& output, std::uint64_t seed, int threads,
                const std::string& data_dir) {
  std::string path = config_arg;
  if (!std::filesystem::exists(path)) {
    std::string preset = floq::runner::preset_path(config_arg, data_dir);
    if (std::filesystem::exists(preset)) path = preset;
  }

  floq::runner::ExperimentConfig cfg;
  try {
    cfg = floq::runner::parse_config(path, data_dir);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", {{"kind", "config"}, {"message", e.what()}, {"config", config_arg}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";

  floq::runner::RunOptions opts;
  opts.output_dir = output;
  opts.seed = seed;
  opts.threads = threads;
  opts.data_dir = data_dir;
  try {
    auto bundle = floq::runner::run(cfg, opts);
    std::cout << "wrote " << bundle.files.size() << " file(s) to " << bundle.output_dir << " (config "
              << bundle.manifest.at("config_hash").get<std::string>() << ")\n";
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", {{"kind", "runtime"}, {"message", e.what()}, {"config", config_arg}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-engineered transmon chain simulator"};
  app.require_subcommand(1);

  std::string config_arg, output, data_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  auto* run_cmd = app.add_subcommand("run", "Run an experiment config or bundled preset");
  run_cmd->add_option("config", config_arg, "Config file path or preset name")->required();
  run_cmd->add_option("--output", output, "Output directory (overrides the config)");
  run_cmd->add_option("--seed", seed, "Seed override");
  run_cmd->add_option("--threads", threads, "Sweep-level worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--data-dir", data_dir, "Data directory with presets and table_s1.json");

  auto* validate_cmd = app.add_subcommand("validate", "Validate a config without running it");
  validate_cmd->add_option("config", config_arg, "Config file path or preset name")->required();
  validate_cmd->add_option("--data-dir", data_dir, "Data directory");

  auto* list_cmd = app.add_subcommand("list-presets", "List bundled experiment presets");
  list_cmd->add_option("--data-dir", data_dir, "Data directory");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(run_cmd)) return run_command(config_arg, output, seed, threads, data_dir);

  if (app.got_subcommand(validate_cmd)) {
    std::string path = config_arg;
    if (!std::filesystem::exists(path)) {
      std::string preset = floq::runner::preset_path(config_arg, data_dir);
      if (std::filesystem::exists(preset)) path = preset;
    }
    try {
      auto cfg = floq::runner::parse_config(path, data_dir);
      for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "ok: " << cfg.protocol << " (config " << cfg.hash() << ")\n";
      return 0;
    } catch (const std::exception& e) {
      nlohmann::json err = {{"error", {{"kind", "config"}, {"message", e.what()}, {"config", config_arg}}}};
      std::cerr << err.dump() << "\n";
      return 1;
    }
  }

  if (app.got_subcommand(list_cmd)) {
    for (const auto& name : floq::runner::list_presets(data_dir)) std::cout << name << "\n";
    return 0;
  }
  return 0;
}
