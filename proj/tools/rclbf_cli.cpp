// Experiment runner: train / eval / verify / compare over the benchmark
// systems, driven by a preset name plus optional JSON config overrides.

#include "rclbf/config.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::string out;
  std::string checkpoint_v;
  std::string checkpoint_pi;
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  bool deterministic = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file (overrides the preset)");
  cmd->add_option("--preset", flags.preset, "system preset name (e.g. satellite, segway)");
  cmd->add_option("--seed", flags.seed, "master random seed")->each([&](const std::string&) {
    flags.seed_set = true;
  });
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--jobs", flags.jobs, "worker count (runs are serial today; recorded only)");
  cmd->add_flag("--deterministic", flags.deterministic,
                "force single-threaded deterministic execution");
  cmd->add_option("--checkpoint-v", flags.checkpoint_v, "certificate checkpoint path");
  cmd->add_option("--checkpoint-pi", flags.checkpoint_pi, "policy checkpoint path");
}

int resolve_and_run(const CommonFlags& flags, const std::string& mode) {
  rclbf::ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    std::ifstream is(flags.config_path);
    if (!is.good()) {
      std::cerr << "error: cannot open config file: " << flags.config_path << "\n";
      return rclbf::kExitConfigError;
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    auto result = rclbf::validate_config(buf.str());
    if (!result.ok()) {
      for (const auto& err : result.errors) std::cerr << "config error: " << err << "\n";
      return rclbf::kExitConfigError;
    }
    cfg = std::move(*result.config);
    if (cfg.mode != mode) {
      std::cerr << "config error: mode: config says '" << cfg.mode << "' but subcommand is '"
                << mode << "'\n";
      return rclbf::kExitConfigError;
    }
  } else if (!flags.preset.empty()) {
    try {
      cfg = rclbf::default_experiment(flags.preset, mode);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return rclbf::kExitConfigError;
    }
  } else {
    std::cerr << "error: provide --config or --preset\n";
    return rclbf::kExitConfigError;
  }

  // Command-line flags win over the config file.
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (!flags.checkpoint_v.empty()) cfg.checkpoint_v = flags.checkpoint_v;
  if (!flags.checkpoint_pi.empty()) cfg.checkpoint_pi = flags.checkpoint_pi;
  cfg.jobs = flags.jobs;
  if (flags.deterministic) cfg.deterministic = true;

  const int code = rclbf::run_experiment(cfg);
  std::cout << "run finished: mode=" << cfg.mode << " system=" << cfg.system_name
            << " out=" << cfg.out_dir << " exit=" << code << "\n";
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust CLBF toolkit: certificate training, safe control, verification"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, verify_flags, compare_flags;
  add_common_flags(app.add_subcommand("train", "train certificate + policy networks"),
                   train_flags);
  add_common_flags(app.add_subcommand("eval", "closed-loop evaluation of the safety filter"),
                   eval_flags);
  add_common_flags(app.add_subcommand("verify", "sampling-based certificate audit"),
                   verify_flags);
  add_common_flags(app.add_subcommand("compare", "rCLBF-QP vs nominal vs scenario MPC"),
                   compare_flags);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("train")) return resolve_and_run(train_flags, "train");
  if (app.got_subcommand("eval")) return resolve_and_run(eval_flags, "eval");
  if (app.got_subcommand("verify")) return resolve_and_run(verify_flags, "verify");
  if (app.got_subcommand("compare")) return resolve_and_run(compare_flags, "compare");
  return rclbf::kExitConfigError;
}
