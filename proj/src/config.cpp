#include "rclbf/config.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rclbf {

using nlohmann::json;

namespace fs = std::filesystem;

namespace {

constexpr const char* kCodeVersion = "rclbf 1.0.0";

std::string hardware_note() {
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  }
  return "unknown";
}

json quotas_to_json(const std::vector<SamplingQuota>& quotas) {
  json arr = json::array();
  for (const auto& q : quotas) {
    json item;
    switch (q.region) {
      case SamplingQuota::Region::norm_ball: item["region"] = "ball"; break;
      case SamplingQuota::Region::safe_set: item["region"] = "safe"; break;
      case SamplingQuota::Region::unsafe_set: item["region"] = "unsafe"; break;
    }
    item["radius_lo"] = q.radius_lo;
    item["radius_hi"] = q.radius_hi;
    item["fraction"] = q.fraction;
    arr.push_back(item);
  }
  return arr;
}

} // namespace

ExperimentConfig default_experiment(const std::string& system_name, const std::string& mode) {
  const auto system = make_system(system_name);
  ExperimentConfig cfg;
  cfg.system_name = system_name;
  cfg.mode = mode;
  cfg.train = TrainConfig::from_preset(system->preset());
  cfg.controller = ControllerConfig::from_preset(system->preset());
  cfg.sim = SimConfig::from_preset(system->preset());
  cfg.mpc = MPCConfig::from_preset(*system);
  return cfg;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["system"] = system_name;
  j["mode"] = mode;
  j["seed"] = seed;
  j["out"] = out_dir;
  j["jobs"] = jobs;
  j["deterministic"] = deterministic;
  if (!checkpoint_v.empty()) j["checkpoint_v"] = checkpoint_v;
  if (!checkpoint_pi.empty()) j["checkpoint_pi"] = checkpoint_pi;
  j["train"] = {{"a1", train.a1},
                {"a2", train.a2},
                {"a3", train.a3},
                {"eps", train.eps},
                {"pi_weight", train.pi_weight},
                {"lr", train.lr},
                {"weight_decay", train.weight_decay},
                {"n_train", train.n_train},
                {"epochs", train.epochs},
                {"batch", train.batch},
                {"alternation", train.alternation},
                {"validation_fraction", train.validation_fraction},
                {"quadratic_init", train.quadratic_init},
                {"quotas", quotas_to_json(train.quotas)}};
  j["controller"] = {{"lambda", controller.lambda},
                     {"c", controller.c},
                     {"rho", controller.rho},
                     {"allow_relax", controller.allow_relax}};
  j["sim"] = {{"dt_control", sim.dt_control},
              {"dt_integrate", sim.dt_integrate},
              {"horizon", sim.horizon},
              {"n_trials", sim.n_trials},
              {"theta_resample_period", sim.theta_resample_period}};
  j["mpc"] = {{"horizon", mpc.horizon}, {"dt", mpc.dt}, {"terminal_weight", mpc.terminal_weight}};
  j["verify"] = {{"level_samples", level_samples},
                 {"grid_res", grid_res},
                 {"section_axis_i", section_axis_i},
                 {"section_axis_j", section_axis_j}};
  return j.dump(2);
}

namespace {

/// Collects override/validation errors with their key paths.
struct Checker {
  std::vector<std::string>& errors;

  void fail(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

  template <typename T>
  void read(const json& obj, const std::string& path, const std::string& key, T& target) {
    if (!obj.contains(key)) return;
    try {
      target = obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(path + "." + key, "wrong type");
    }
  }
};

std::vector<SamplingQuota> parse_quotas(const json& arr, Checker& chk,
                                        const std::string& path) {
  std::vector<SamplingQuota> quotas;
  if (!arr.is_array()) {
    chk.fail(path, "must be an array");
    return quotas;
  }
  for (size_t i = 0; i < arr.size(); ++i) {
    const std::string item_path = path + "[" + std::to_string(i) + "]";
    SamplingQuota q;
    std::string region = "ball";
    chk.read(arr[i], item_path, "region", region);
    if (region == "ball")
      q.region = SamplingQuota::Region::norm_ball;
    else if (region == "safe")
      q.region = SamplingQuota::Region::safe_set;
    else if (region == "unsafe")
      q.region = SamplingQuota::Region::unsafe_set;
    else
      chk.fail(item_path + ".region", "must be one of ball/safe/unsafe");
    chk.read(arr[i], item_path, "radius_lo", q.radius_lo);
    chk.read(arr[i], item_path, "radius_hi", q.radius_hi);
    chk.read(arr[i], item_path, "fraction", q.fraction);
    quotas.push_back(q);
  }
  return quotas;
}

} // namespace

ConfigResult validate_config(const std::string& raw_json) {
  ConfigResult result;
  json j;
  try {
    j = json::parse(raw_json);
  } catch (const json::parse_error& e) {
    result.errors.push_back(std::string("config is not valid JSON: ") + e.what());
    return result;
  }

  Checker chk{result.errors};
  std::string system_name, mode;
  chk.read(j, "", "system", system_name);
  chk.read(j, "", "mode", mode);
  if (system_name.empty()) chk.fail("system", "is required");
  if (mode != "train" && mode != "eval" && mode != "verify" && mode != "compare")
    chk.fail("mode", "must be one of train/eval/verify/compare");
  if (!result.errors.empty()) return result;

  ExperimentConfig cfg;
  try {
    cfg = default_experiment(system_name, mode);
  } catch (const std::exception& e) {
    chk.fail("system", e.what());
    return result;
  }

  chk.read(j, "", "seed", cfg.seed);
  chk.read(j, "", "out", cfg.out_dir);
  chk.read(j, "", "jobs", cfg.jobs);
  chk.read(j, "", "deterministic", cfg.deterministic);
  chk.read(j, "", "checkpoint_v", cfg.checkpoint_v);
  chk.read(j, "", "checkpoint_pi", cfg.checkpoint_pi);

  if (j.contains("train")) {
    const json& t = j["train"];
    chk.read(t, "train", "a1", cfg.train.a1);
    chk.read(t, "train", "a2", cfg.train.a2);
    chk.read(t, "train", "a3", cfg.train.a3);
    chk.read(t, "train", "eps", cfg.train.eps);
    chk.read(t, "train", "pi_weight", cfg.train.pi_weight);
    chk.read(t, "train", "lr", cfg.train.lr);
    chk.read(t, "train", "weight_decay", cfg.train.weight_decay);
    chk.read(t, "train", "n_train", cfg.train.n_train);
    chk.read(t, "train", "epochs", cfg.train.epochs);
    chk.read(t, "train", "batch", cfg.train.batch);
    chk.read(t, "train", "alternation", cfg.train.alternation);
    chk.read(t, "train", "validation_fraction", cfg.train.validation_fraction);
    chk.read(t, "train", "quadratic_init", cfg.train.quadratic_init);
    if (t.contains("quotas")) cfg.train.quotas = parse_quotas(t["quotas"], chk, "train.quotas");
  }
  if (j.contains("controller")) {
    const json& c = j["controller"];
    chk.read(c, "controller", "lambda", cfg.controller.lambda);
    chk.read(c, "controller", "c", cfg.controller.c);
    chk.read(c, "controller", "rho", cfg.controller.rho);
    chk.read(c, "controller", "allow_relax", cfg.controller.allow_relax);
  }
  if (j.contains("sim")) {
    const json& s = j["sim"];
    chk.read(s, "sim", "dt_control", cfg.sim.dt_control);
    chk.read(s, "sim", "dt_integrate", cfg.sim.dt_integrate);
    chk.read(s, "sim", "horizon", cfg.sim.horizon);
    chk.read(s, "sim", "n_trials", cfg.sim.n_trials);
    chk.read(s, "sim", "theta_resample_period", cfg.sim.theta_resample_period);
  }
  if (j.contains("mpc")) {
    const json& m = j["mpc"];
    chk.read(m, "mpc", "horizon", cfg.mpc.horizon);
    chk.read(m, "mpc", "dt", cfg.mpc.dt);
    chk.read(m, "mpc", "terminal_weight", cfg.mpc.terminal_weight);
  }
  if (j.contains("verify")) {
    const json& v = j["verify"];
    chk.read(v, "verify", "level_samples", cfg.level_samples);
    chk.read(v, "verify", "grid_res", cfg.grid_res);
    chk.read(v, "verify", "section_axis_i", cfg.section_axis_i);
    chk.read(v, "verify", "section_axis_j", cfg.section_axis_j);
  }

  // Cross-field invariants (all reported, not just the first).
  if (cfg.controller.lambda <= 0) chk.fail("controller.lambda", "must be > 0");
  if (cfg.controller.c <= 0) chk.fail("controller.c", "must be > 0");
  if (cfg.controller.rho <= 0) chk.fail("controller.rho", "must be > 0");
  if (cfg.train.lr <= 0) chk.fail("train.lr", "must be > 0");
  if (cfg.train.eps <= 0) chk.fail("train.eps", "must be > 0");
  if (cfg.train.a1 <= 0 || cfg.train.a2 <= 0 || cfg.train.a3 <= 0)
    chk.fail("train.a1/a2/a3", "must be > 0");
  if (cfg.train.n_train < 1) chk.fail("train.n_train", "must be >= 1");
  if (cfg.train.epochs < 0) chk.fail("train.epochs", "must be >= 0");
  if (cfg.train.validation_fraction < 0 || cfg.train.validation_fraction >= 1)
    chk.fail("train.validation_fraction", "must be in [0, 1)");
  double quota_sum = 0.0;
  for (const auto& q : cfg.train.quotas) {
    if (q.fraction < 0) chk.fail("train.quotas.fraction", "must be >= 0");
    quota_sum += q.fraction;
  }
  if (quota_sum > 1.0 + 1e-12) chk.fail("train.quotas", "fractions must sum to <= 1");
  if (cfg.sim.dt_integrate <= 0 || cfg.sim.dt_integrate > cfg.sim.dt_control)
    chk.fail("sim.dt_integrate", "must be in (0, dt_control]");
  if (cfg.sim.horizon <= 0) chk.fail("sim.horizon", "must be > 0");
  if (cfg.sim.n_trials < 1) chk.fail("sim.n_trials", "must be >= 1");
  if (cfg.mpc.horizon < 1) chk.fail("mpc.horizon", "must be >= 1");
  if (cfg.mpc.dt <= 0) chk.fail("mpc.dt", "must be > 0");
  const int n_state = static_cast<int>(make_system(system_name)->state_dim());
  if (cfg.section_axis_i == cfg.section_axis_j || cfg.section_axis_i < 0 ||
      cfg.section_axis_j < 0 || cfg.section_axis_i >= n_state || cfg.section_axis_j >= n_state)
    chk.fail("verify.section_axis_i/j", "must be distinct valid state indices");

  if (!result.errors.empty()) return result;
  result.config = std::move(cfg);
  return result;
}

std::string RunManifest::to_json() const {
  json j;
  j["mode"] = mode;
  j["system"] = system_name;
  j["seed"] = seed;
  j["config"] = json::parse(config_snapshot);
  j["code_version"] = code_version;
  j["hardware"] = hardware;
  j["wall_seconds"] = wall_seconds;
  j["outputs"] = outputs;
  j["notes"] = notes;
  return j.dump(2);
}

void RunManifest::write(const std::string& out_dir) const {
  fs::create_directories(out_dir);
  const fs::path final_path = fs::path(out_dir) / "manifest.json";
  const fs::path tmp_path = fs::path(out_dir) / "manifest.json.tmp";
  {
    std::ofstream os(tmp_path);
    check(os.good(), "manifest: cannot open " + tmp_path.string());
    os << to_json() << "\n";
  }
  fs::rename(tmp_path, final_path);
}

namespace {

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream os(path);
  check(os.good(), "cannot open output file: " + path.string());
  os << body;
}

std::string trials_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "trial,safe,diverged,goal_metric_value,mean_solve_time_ms,relax_fraction\n";
  for (size_t i = 0; i < report.trials.size(); ++i) {
    const auto& t = report.trials[i];
    os << i << "," << (t.safe ? 1 : 0) << "," << (t.diverged ? 1 : 0) << ","
       << t.goal_metric_value << "," << 1e3 * t.mean_solve_time << "," << t.relax_fraction
       << "\n";
  }
  return os.str();
}

// Deterministic mode promises byte-identical CSV bodies across reruns, so
// wall-clock timing columns are zeroed before writing.
std::vector<EvalReport> strip_timing(std::vector<EvalReport> reports) {
  for (auto& r : reports) {
    r.mean_solve_time = r.median_solve_time = 0.0;
    for (auto& t : r.trials) t.mean_solve_time = 0.0;
  }
  return reports;
}

Mlp load_required_checkpoint(const std::string& path, const std::string& role) {
  if (path.empty())
    throw std::invalid_argument("missing " + role + " checkpoint path (set checkpoint_v)");
  if (!fs::exists(path))
    throw std::invalid_argument(role + " checkpoint not found: " + path);
  return Mlp::load_file(path);
}

int run_train(const ExperimentConfig& cfg, const SystemModel& system, RunManifest& manifest) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainResult res = train(system, tc);
  res.v.save_file((fs::path(cfg.out_dir) / "v.net").string());
  res.pi.save_file((fs::path(cfg.out_dir) / "pi.net").string());
  write_text(fs::path(cfg.out_dir) / "training_log.csv", res.log.to_csv());
  manifest.outputs = {"v.net", "pi.net", "training_log.csv"};
  if (res.diverged) {
    manifest.notes.push_back("training diverged; last finite checkpoint written");
    return kExitNumericalError;
  }
  return kExitOk;
}

int run_eval(const ExperimentConfig& cfg, std::shared_ptr<const SystemModel> system,
             RunManifest& manifest) {
  const Mlp v = load_required_checkpoint(cfg.checkpoint_v, "certificate");
  const NominalPolicy nominal = make_nominal_policy(*system);
  const RclbfQpController ctrl(system, v, nominal, cfg.controller);
  SimConfig sc = cfg.sim;
  sc.seed = cfg.seed;
  const EvalReport report = evaluate(*system, ctrl, sc);
  const std::vector<EvalReport> rows =
      cfg.deterministic ? strip_timing({report}) : std::vector<EvalReport>{report};
  write_text(fs::path(cfg.out_dir) / "eval.csv", report_csv(rows));
  write_text(fs::path(cfg.out_dir) / "trials.csv", trials_csv(rows.front()));
  manifest.outputs = {"eval.csv", "trials.csv"};
  return kExitOk;
}

int run_verify(const ExperimentConfig& cfg, std::shared_ptr<const SystemModel> system,
               RunManifest& manifest) {
  const Mlp v = load_required_checkpoint(cfg.checkpoint_v, "certificate");
  const NominalPolicy nominal = make_nominal_policy(*system);
  const RclbfQpController ctrl(system, v, nominal, cfg.controller);

  const LevelSetReport levels =
      level_set_report(v, *system, cfg.controller.c, cfg.level_samples, cfg.seed);
  const GoalConditionReport goal = goal_condition_report(
      v, *system, /*delta=*/system->task().goal_tolerance, cfg.level_samples, cfg.seed);

  SectionSpec section;
  section.axis_i = cfg.section_axis_i;
  section.axis_j = cfg.section_axis_j;
  section.lo_i = system->task().lo[cfg.section_axis_i];
  section.hi_i = system->task().hi[cfg.section_axis_i];
  section.lo_j = system->task().lo[cfg.section_axis_j];
  section.hi_j = system->task().hi[cfg.section_axis_j];
  section.res_i = section.res_j = cfg.grid_res;
  section.fixed = system->task().x_goal;
  const ViolationMap map =
      violation_map(v, ctrl, PolicySource::qp, *system, cfg.controller, section);

  std::ostringstream summary;
  summary.precision(17);
  summary << "metric,value\n"
          << "safe_fraction," << levels.safe_fraction << "\n"
          << "unsafe_fraction," << levels.unsafe_fraction << "\n"
          << "max_safe_excess," << levels.max_safe_excess << "\n"
          << "max_unsafe_deficit," << levels.max_unsafe_deficit << "\n"
          << "v_goal," << goal.v_goal << "\n"
          << "min_v_outside_goal_ball," << goal.min_outside_ball << "\n"
          << "max_violation," << map.max_violation() << "\n"
          << "violating_fraction," << map.violating_fraction() << "\n";
  write_text(fs::path(cfg.out_dir) / "verify_summary.csv", summary.str());
  write_text(fs::path(cfg.out_dir) / "violation_map.csv", map.to_csv());
  manifest.outputs = {"verify_summary.csv", "violation_map.csv"};

  const bool invalid = levels.unsafe_fraction < 0.5 || !goal.positivity_ok;
  if (invalid) {
    manifest.notes.push_back("certificate-invalid: level-set separation or positivity failed");
    return kExitThresholdFailure;
  }
  return kExitOk;
}

int run_compare(const ExperimentConfig& cfg, std::shared_ptr<const SystemModel> system,
                RunManifest& manifest) {
  const Mlp v = load_required_checkpoint(cfg.checkpoint_v, "certificate");
  const NominalPolicy nominal = make_nominal_policy(*system);
  const RclbfQpController rclbf(system, v, nominal, cfg.controller);
  const NominalController lqr(nominal);
  const MpcController mpc(system, cfg.mpc);

  SimConfig sc = cfg.sim;
  sc.seed = cfg.seed;
  const auto reports = compare_controllers(*system, {&rclbf, &lqr, &mpc}, sc);
  // The CSV is the reproducible artifact (timing stripped in deterministic
  // mode); the text report always keeps the measured solve times.
  write_text(fs::path(cfg.out_dir) / "comparison.csv",
             report_csv(cfg.deterministic ? strip_timing(reports) : reports));
  std::ostringstream txt;
  txt << "baseline: open-loop scenario MPC (linearized at the goal; per-vertex constraint "
         "copies), not a closed-loop min-max formulation\n"
      << comparison_text(reports);
  write_text(fs::path(cfg.out_dir) / "comparison.txt", txt.str());
  manifest.outputs = {"comparison.csv", "comparison.txt"};
  return kExitOk;
}

} // namespace

int run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.mode = cfg.mode;
  manifest.system_name = cfg.system_name;
  manifest.seed = cfg.seed;
  manifest.config_snapshot = cfg.to_json();
  manifest.code_version = kCodeVersion;
  manifest.hardware = hardware_note();

  int code = kExitOk;
  try {
    fs::create_directories(cfg.out_dir);
    const auto system = make_system(cfg.system_name);
    if (cfg.mode == "train")
      code = run_train(cfg, *system, manifest);
    else if (cfg.mode == "eval")
      code = run_eval(cfg, system, manifest);
    else if (cfg.mode == "verify")
      code = run_verify(cfg, system, manifest);
    else if (cfg.mode == "compare")
      code = run_compare(cfg, system, manifest);
    else
      throw std::invalid_argument("unknown mode: " + cfg.mode);
  } catch (const std::invalid_argument& e) {
    manifest.notes.push_back(std::string("configuration error: ") + e.what());
    code = kExitConfigError;
  } catch (const std::exception& e) {
    manifest.notes.push_back(std::string("numerical error: ") + e.what());
    code = kExitNumericalError;
  }

  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    manifest.write(cfg.out_dir);
  } catch (const std::exception&) {
    if (code == kExitOk) code = kExitNumericalError;
  }
  return code;
}

} // namespace rclbf
