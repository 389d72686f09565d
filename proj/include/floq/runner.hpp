// runner.hpp — Declarative experiment runner: configs in, CSV tables out

#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace floq::runner {

struct ExperimentConfig {
  std::string protocol;
  nlohmann::json canonical;  // validated config with defaults filled in
  std::uint64_t seed = 1;
  std::string output = "out";
  std::string device_path;  // resolved
  std::vector<std::string> warnings;

  std::string hash() const;  // FNV-1a over the canonical serialization
};

// Parses and validates; throws std::invalid_argument listing every
// violation with its key path. Unknown keys produce warnings, not errors.
ExperimentConfig parse_config(const std::string& path, const std::string& data_dir = "");
ExperimentConfig parse_config_text(const std::string& json_text, const std::string& base_dir,
                                   const std::string& data_dir = "");

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Header row plus decimal text with 15 significant digits.
void write_csv(const Table& table, const std::string& path);

struct RunOptions {
  std::string output_dir;  // overrides config.output when non-empty
  std::uint64_t seed = 0;  // overrides config.seed when nonzero
  int threads = 1;
  std::string data_dir;  // presets/device location; default bundled
};

struct ResultBundle {
  std::string output_dir;
  std::vector<std::string> files;  // CSV files written
  nlohmann::json manifest;
};

ResultBundle run(const ExperimentConfig& config, const RunOptions& opts = {});

std::vector<std::string> list_presets(const std::string& data_dir = "");
std::string preset_path(const std::string& name, const std::string& data_dir = "");

}  // namespace floq::runner
