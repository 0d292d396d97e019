#include "rclbf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace rclbf {
namespace {

Vec saturate(Vec u, const Vec& lo, const Vec& hi) {
  if (lo.size() == u.size()) u = u.cwiseMax(lo);
  if (hi.size() == u.size()) u = u.cwiseMin(hi);
  return u;
}

// One RK4 step of the closed dynamics with the control held constant.
Vec rk4_step(const SystemModel& system, const Vec& x, const Vec& u, const Vec& theta, double h) {
  const Vec k1 = system.xdot(x, u, theta);
  const Vec k2 = system.xdot(x + 0.5 * h * k1, u, theta);
  const Vec k3 = system.xdot(x + 0.5 * h * k2, u, theta);
  const Vec k4 = system.xdot(x + h * k3, u, theta);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

uint64_t sub_seed(uint64_t seed, uint64_t index) {
  // splitmix64 over (seed, index); decouples per-trial streams from the
  // master draw order.
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

} // namespace

SimConfig SimConfig::from_preset(const SystemPreset& preset) {
  SimConfig cfg;
  cfg.horizon = preset.horizon;
  cfg.x0_lo = preset.x0_lo;
  cfg.x0_hi = preset.x0_hi;
  cfg.u_lo = preset.u_lo;
  cfg.u_hi = preset.u_hi;
  cfg.theta_resample_period = preset.theta_resample_period;
  return cfg;
}

Trajectory rollout(const SystemModel& system, const Controller& controller, const Vec& theta,
                   const Vec& x0, const SimConfig& cfg, uint64_t seed) {
  check(x0.allFinite() && x0.size() == system.state_dim(), "rollout: bad x0");
  check(system.scenarios().contains(theta), "rollout: theta outside the scenario hull");
  check(cfg.dt_integrate <= cfg.dt_control + 1e-15 && cfg.dt_integrate > 0.0,
        "rollout: dt_integrate must be in (0, dt_control]");
  check(cfg.horizon > 0.0, "rollout: horizon must be positive");

  const int n_steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt_control));
  const int n_sub = std::max(1, static_cast<int>(std::llround(cfg.dt_control / cfg.dt_integrate)));
  const double h = cfg.dt_control / n_sub;
  const double diverge_radius = 1e3 * std::max(1.0, (system.task().hi - system.task().lo).norm());

  std::mt19937_64 rng(seed);
  Vec theta_now = theta;
  double next_resample = cfg.theta_resample_period > 0.0 ? cfg.theta_resample_period
                                                         : std::numeric_limits<double>::infinity();

  Trajectory traj;
  traj.t.reserve(static_cast<size_t>(n_steps) + 1);
  traj.x.reserve(static_cast<size_t>(n_steps) + 1);
  Vec x = x0;
  traj.t.push_back(0.0);
  traj.x.push_back(x);
  traj.entered_unsafe = system.task().unsafe(x);
  double dmin = (x - system.task().x_goal).norm(), dmax = dmin;

  for (int k = 0; k < n_steps; ++k) {
    const double t_now = k * cfg.dt_control;
    if (t_now >= next_resample - 1e-12) {
      theta_now = system.sample_theta(rng);
      next_resample += cfg.theta_resample_period;
    }
    const ControlResult cr = controller.control(x);
    const Vec u = saturate(cr.u, cfg.u_lo, cfg.u_hi);
    for (int s = 0; s < n_sub; ++s) x = rk4_step(system, x, u, theta_now, h);

    traj.t.push_back((k + 1) * cfg.dt_control);
    traj.x.push_back(x);
    traj.u.push_back(u);
    traj.r.push_back(cr.relaxation);
    traj.solve_time.push_back(cr.solve_time);

    if (!x.allFinite() || x.norm() > diverge_radius) {
      traj.diverged = true;
      break;
    }
    if (system.task().unsafe(x)) traj.entered_unsafe = true;
    const double d = (x - system.task().x_goal).norm();
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }

  traj.min_goal_distance = dmin;
  traj.max_goal_distance = dmax;
  traj.final_goal_distance = traj.diverged ? dmax : (traj.x.back() - system.task().x_goal).norm();
  return traj;
}

namespace {

EvalReport run_trials(const SystemModel& system, const Controller& controller,
                      const SimConfig& cfg, const std::vector<Vec>& thetas,
                      const std::vector<Vec>& x0s) {
  EvalReport report;
  report.controller_name = controller.name();
  report.goal_metric = system.preset().goal_metric;

  std::vector<double> all_times;
  int safe_count = 0;
  double metric_sum = 0.0;
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    const Trajectory traj = rollout(system, controller, thetas[static_cast<size_t>(trial)],
                                    x0s[static_cast<size_t>(trial)], cfg,
                                    sub_seed(cfg.seed, static_cast<uint64_t>(trial)));
    TrialRecord rec;
    rec.theta = thetas[static_cast<size_t>(trial)];
    rec.x0 = x0s[static_cast<size_t>(trial)];
    rec.diverged = traj.diverged;
    rec.safe = !traj.entered_unsafe && !traj.diverged;
    switch (report.goal_metric) {
      case GoalMetric::final_error: rec.goal_metric_value = traj.final_goal_distance; break;
      case GoalMetric::max_tracking_error: rec.goal_metric_value = traj.max_goal_distance; break;
      case GoalMetric::reach_fraction:
        rec.goal_metric_value =
            traj.min_goal_distance <= system.task().goal_tolerance ? 1.0 : 0.0;
        break;
    }
    if (!traj.solve_time.empty()) {
      double sum = 0.0;
      for (double ts : traj.solve_time) sum += ts;
      rec.mean_solve_time = sum / static_cast<double>(traj.solve_time.size());
      int relaxed = 0;
      for (double r : traj.r)
        if (r > 1e-9) ++relaxed;
      rec.relax_fraction = static_cast<double>(relaxed) / static_cast<double>(traj.r.size());
      all_times.insert(all_times.end(), traj.solve_time.begin(), traj.solve_time.end());
    }
    safe_count += rec.safe ? 1 : 0;
    metric_sum += rec.goal_metric_value;
    report.trials.push_back(std::move(rec));
  }

  report.safety_rate = static_cast<double>(safe_count) / static_cast<double>(cfg.n_trials);
  report.goal_error = metric_sum / static_cast<double>(cfg.n_trials);
  if (!all_times.empty()) {
    double sum = 0.0;
    for (double ts : all_times) sum += ts;
    report.mean_solve_time = sum / static_cast<double>(all_times.size());
    report.median_solve_time = median(all_times);
  }
  return report;
}

void draw_trial_inputs(const SystemModel& system, const SimConfig& cfg, std::vector<Vec>& thetas,
                       std::vector<Vec>& x0s) {
  check(cfg.n_trials >= 1, "evaluate: need at least one trial");
  check(cfg.x0_lo.size() == system.state_dim() && cfg.x0_hi.size() == system.state_dim(),
        "evaluate: initial-condition box missing");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    thetas.push_back(system.sample_theta(rng));
    Vec x0(system.state_dim());
    for (int i = 0; i < system.state_dim(); ++i)
      x0[i] = cfg.x0_lo[i] + unit(rng) * (cfg.x0_hi[i] - cfg.x0_lo[i]);
    x0s.push_back(std::move(x0));
  }
}

} // namespace

EvalReport evaluate(const SystemModel& system, const Controller& controller,
                    const SimConfig& cfg) {
  std::vector<Vec> thetas, x0s;
  draw_trial_inputs(system, cfg, thetas, x0s);
  return run_trials(system, controller, cfg, thetas, x0s);
}

std::vector<EvalReport> compare_controllers(const SystemModel& system,
                                            const std::vector<const Controller*>& controllers,
                                            const SimConfig& cfg) {
  check(controllers.size() >= 1, "compare_controllers: need at least one controller");
  std::vector<Vec> thetas, x0s;
  draw_trial_inputs(system, cfg, thetas, x0s);
  std::vector<EvalReport> reports;
  for (const Controller* ctrl : controllers) {
    check(ctrl != nullptr, "compare_controllers: null controller");
    reports.push_back(run_trials(system, *ctrl, cfg, thetas, x0s));
  }
  return reports;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  os << "t";
  const Eigen::Index n = traj.x.front().size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  const Eigen::Index ell = traj.u.empty() ? 0 : traj.u.front().size();
  for (Eigen::Index i = 0; i < ell; ++i) os << ",u" << i;
  os << ",r,solve_time\n";
  for (size_t k = 0; k < traj.t.size(); ++k) {
    os << traj.t[k];
    for (Eigen::Index i = 0; i < n; ++i) os << "," << traj.x[k][i];
    // Controls are indexed by the step that produced the next state.
    if (k < traj.u.size()) {
      for (Eigen::Index i = 0; i < ell; ++i) os << "," << traj.u[k][i];
      os << "," << traj.r[k] << "," << traj.solve_time[k];
    } else {
      for (Eigen::Index i = 0; i < ell + 2; ++i) os << ",";
    }
    os << "\n";
  }
  return os.str();
}

namespace {
const char* metric_name(GoalMetric m) {
  switch (m) {
    case GoalMetric::final_error: return "final_error";
    case GoalMetric::max_tracking_error: return "max_tracking_error";
    case GoalMetric::reach_fraction: return "reach_fraction";
  }
  return "unknown";
}
} // namespace

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os.precision(17);
  os << "controller,safety_rate,goal_error,goal_metric,mean_solve_time_ms,median_solve_time_ms\n";
  for (const auto& r : reports) {
    os << r.controller_name << "," << r.safety_rate << "," << r.goal_error << ","
       << metric_name(r.goal_metric) << "," << 1e3 * r.mean_solve_time << ","
       << 1e3 * r.median_solve_time << "\n";
  }
  return os.str();
}

std::string comparison_text(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "controller            safety   goal metric (" << (reports.empty() ? "n/a" : metric_name(reports.front().goal_metric))
     << ")   mean solve ms\n";
  for (const auto& r : reports) {
    os << r.controller_name;
    for (size_t i = r.controller_name.size(); i < 22; ++i) os << ' ';
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%5.1f%%   %-22.4f   %.4f\n", 100.0 * r.safety_rate,
                  r.goal_error, 1e3 * r.mean_solve_time);
    os << buf;
  }
  if (reports.size() >= 2 && reports.front().mean_solve_time > 0.0) {
    os << "speedup of " << reports.front().controller_name << " vs others:";
    for (size_t i = 1; i < reports.size(); ++i)
      os << " " << reports[i].controller_name << "="
         << reports[i].mean_solve_time / reports.front().mean_solve_time << "x";
    os << "\n";
  }
  return os.str();
}

} // namespace rclbf
