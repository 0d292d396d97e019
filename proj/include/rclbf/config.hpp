#pragma once

#include "rclbf/controller.hpp"
#include "rclbf/mpc.hpp"
#include "rclbf/sim.hpp"
#include "rclbf/training.hpp"
#include "rclbf/verify.hpp"

#include <optional>

namespace rclbf {

/// A fully resolved experiment: system preset plus any config-file overrides.
struct ExperimentConfig {
  std::string system_name;
  std::string mode; // train | eval | verify | compare
  uint64_t seed = 0;
  std::string out_dir = "runs/run";
  int jobs = 1;
  bool deterministic = true;
  std::string checkpoint_v;  // required by eval / verify / compare
  std::string checkpoint_pi; // optional

  TrainConfig train;
  ControllerConfig controller;
  SimConfig sim;
  MPCConfig mpc;

  // Verification settings.
  int level_samples = 100000;
  int grid_res = 101;
  int section_axis_i = 0;
  int section_axis_j = 1;

  std::string to_json() const; // resolved snapshot for the manifest
};

/// Parse + cross-check a JSON config. All errors are collected (not just the
/// first) and reported with their key paths.
struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty() && config.has_value(); }
};

ConfigResult validate_config(const std::string& raw_json);

/// Resolved defaults for a system with no overrides applied.
ExperimentConfig default_experiment(const std::string& system_name, const std::string& mode);

struct RunManifest {
  std::string mode;
  std::string system_name;
  uint64_t seed = 0;
  std::string config_snapshot; // JSON
  std::string code_version;
  std::string hardware;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::vector<std::string> notes;

  std::string to_json() const;
  /// Writes <out_dir>/manifest.json atomically (temp file + rename).
  void write(const std::string& out_dir) const;
};

/// Exit codes shared by the runner and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalError = 3;
inline constexpr int kExitThresholdFailure = 4;

/// Executes one experiment end to end, writing artifacts + manifest under
/// config.out_dir. Returns a process exit code.
int run_experiment(const ExperimentConfig& config);

} // namespace rclbf
