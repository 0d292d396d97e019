#pragma once

#include "rclbf/controller.hpp"
#include "rclbf/system.hpp"

#include <cstdint>

namespace rclbf {

/// Closed-loop rollout settings: zero-order-hold control at dt_control,
/// fixed-step RK4 integration at dt_integrate.
struct SimConfig {
  double dt_control = 0.01;
  double dt_integrate = 1e-3;
  double horizon = 5.0;
  int n_trials = 100;
  Vec x0_lo, x0_hi; // initial-condition box; equal bounds mean a fixed x0
  Vec u_lo, u_hi;   // per-channel saturation; empty means unbounded
  double theta_resample_period = 0.0; // > 0: redraw theta mid-rollout
  uint64_t seed = 0;

  static SimConfig from_preset(const SystemPreset& preset);
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<Vec> u;          // one per control step (length = t.size() - 1)
  std::vector<double> r;       // per-step relaxation
  std::vector<double> solve_time;
  bool diverged = false;
  bool entered_unsafe = false;
  double min_goal_distance = 0.0;
  double max_goal_distance = 0.0;
  double final_goal_distance = 0.0;
};

/// Integrates the closed loop from x0 under fixed theta (resampled every
/// theta_resample_period seconds when configured, driven by `seed`).
Trajectory rollout(const SystemModel& system, const Controller& controller, const Vec& theta,
                   const Vec& x0, const SimConfig& cfg, uint64_t seed = 0);

struct TrialRecord {
  Vec theta;
  Vec x0;
  bool safe = true;
  bool diverged = false;
  double goal_metric_value = 0.0; // per-trial value of the task's metric
  double mean_solve_time = 0.0;
  double relax_fraction = 0.0; // fraction of steps with r > 1e-9
};

struct EvalReport {
  std::string controller_name;
  double safety_rate = 0.0;
  double goal_error = 0.0;        // aggregated per GoalMetric
  GoalMetric goal_metric = GoalMetric::final_error;
  double mean_solve_time = 0.0;   // seconds per controller call
  double median_solve_time = 0.0;
  std::vector<TrialRecord> trials;
};

/// Runs n_trials rollouts with theta drawn uniformly from the scenario hull
/// and x0 from the configured box; aggregates safety and goal metrics.
EvalReport evaluate(const SystemModel& system, const Controller& controller, const SimConfig& cfg);

/// Evaluates every controller on identical (theta, x0) draws (common random
/// numbers) so timing and safety are directly comparable.
std::vector<EvalReport> compare_controllers(const SystemModel& system,
                                            const std::vector<const Controller*>& controllers,
                                            const SimConfig& cfg);

/// CSV export helpers (stable schemas; headers pinned by tests).
std::string trajectory_csv(const Trajectory& traj);
std::string report_csv(const std::vector<EvalReport>& reports);
std::string comparison_text(const std::vector<EvalReport>& reports);

} // namespace rclbf
