#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace skewflow {

struct StepSkewConfig {
  std::size_t trials = 100000;
  std::size_t steps = 4;
  std::size_t burn = 100;
  std::size_t samples = 10000;
  std::size_t export_paths = 1000;
};

struct DriverConfig {
  unsigned block_bits = 16;
  double ceiling = 1.0;
  double window = 0.01;
  double speed = 1.0;
  double attraction = 10.0;
  std::uint64_t tape_seed = 0x7A9E5EEDULL;
  std::vector<double> test_beta{0.2, 0.3, 0.5};
  std::size_t test_trials = 100000;
  std::size_t export_labels = 1000;
};

struct PipeFlowConfig {
  std::size_t orbits = 100000;
  std::size_t steps = 4;
  std::size_t export_orbits = 1000;
};

struct CompareConfig {
  std::size_t max_len = 4;
  std::optional<double> shadow_tolerance;  // defaults to 2 * mesh
  std::optional<std::size_t> shadow_steps;  // defaults to pipeflow.steps
};

struct CheckConfig {
  double max_law_deviation = 0.03;
  double max_indeterminate_fraction = 1e-3;
  bool support_bounds = false;
};

/// Single JSON document; every key is optional and unknown keys are errors.
struct ExperimentConfig {
  std::string system = "doubling";
  std::map<std::string, double> system_params;
  double mesh = 0.125;
  std::size_t orbit_length = 1000000;
  std::size_t cloud_size = 20000;
  StepSkewConfig stepskew;
  DriverConfig driver;
  PipeFlowConfig pipeflow;
  CompareConfig compare;
  CheckConfig checks;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  double shadow_tolerance() const { return compare.shadow_tolerance.value_or(2.0 * mesh); }
  std::size_t shadow_steps() const { return compare.shadow_steps.value_or(pipeflow.steps); }
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig load_config(const std::string& path);
/// Throws ConfigError naming the first invalid parameter.
void validate_config(const ExperimentConfig& config);
nlohmann::json config_json(const ExperimentConfig& config);

enum class Stage { partition, stepskew, network, pipeflow, compare, shadowing };

std::string to_string(Stage stage);

struct ExperimentResult {
  nlohmann::json manifest;
  bool passed = false;
  std::optional<std::string> failure;  // "stage: cause"
};

/// Runs every stage up to and including `last`, writing outputs and
/// manifest.json into config.output_dir. Validation happens before anything
/// is written; a stage error stops the run and is recorded in the manifest.
ExperimentResult run_experiment(const ExperimentConfig& config, Stage last = Stage::shadowing,
                                unsigned jobs = 1);

/// Driver test battery written to config.output_dir.
ExperimentResult run_driver_battery(const ExperimentConfig& config, unsigned jobs = 1);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::string& path);

}  // namespace skewflow
