#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Convex hull of parameter scenarios. Vertex 0..n of the uncertainty set;
/// the nominal vertex is used for linearization and equilibrium solves.
struct ScenarioSet {
  std::vector<Vec> vertices;
  int nominal_index = 0;
  /// True when the vertices are the corners of an axis-aligned box (or an
  /// interval), in which case uniform hull sampling is exact per-dimension.
  bool axis_aligned_box = true;

  int count() const { return static_cast<int>(vertices.size()); }
  int param_dim() const { return vertices.empty() ? 0 : static_cast<int>(vertices.front().size()); }
  const Vec& nominal() const { return vertices.at(static_cast<size_t>(nominal_index)); }

  Vec lower_bounds() const;
  Vec upper_bounds() const;
  bool contains(const Vec& theta, double tol = 1e-9) const;
};

/// Reach-avoid task: goal point, sampling/domain box, and the safe/unsafe
/// predicates. The predicates must never both hold at the same state.
struct TaskSpec {
  Vec x_goal;
  Vec lo;
  Vec hi;
  std::function<bool(const Vec&)> safe;
  std::function<bool(const Vec&)> unsafe;
  double goal_tolerance = 0.1;

  bool in_domain(const Vec& x, double slack = 0.0) const;
};

/// How the goal metric of an evaluation campaign is aggregated.
enum class GoalMetric {
  final_error,        // mean ||x(T) - x_goal||
  max_tracking_error, // mean over trials of max_t ||x(t) - x_goal||
  reach_fraction,     // fraction of trials with min_t ||x - x_goal|| <= delta
};

/// A quota on the training sample: at least `fraction` of points must come
/// from the given region (a norm ball/shell around the goal, or the task's
/// safe/unsafe set).
struct SamplingQuota {
  enum class Region { norm_ball, safe_set, unsafe_set };
  Region region = Region::norm_ball;
  double radius_lo = 0.0;
  double radius_hi = 0.0; // <= 0 means unbounded above
  double fraction = 0.0;

  static SamplingQuota ball(double lo, double hi, double frac) {
    return {Region::norm_ball, lo, hi, frac};
  }
  static SamplingQuota safe(double frac) { return {Region::safe_set, 0, 0, frac}; }
  static SamplingQuota unsafe(double frac) { return {Region::unsafe_set, 0, 0, frac}; }
};

/// Per-system hyperparameters mirrored from the benchmark definitions.
struct SystemPreset {
  double c = 1.0;
  double lambda = 1.0;
  double relax_penalty = 100.0;
  bool allow_relax = true;
  int v_hidden = 64;
  int v_layers = 2; // hidden layers of the certificate trunk
  int pi_hidden = 64;
  int pi_layers = 2;
  int n_train = 100000;
  std::vector<SamplingQuota> quotas;
  bool quadratic_init = true;
  bool nominal_zero = false; // nominal policy is u = 0 instead of LQR feedback
  // Simulation defaults.
  double horizon = 5.0;
  Vec x0_lo, x0_hi;             // initial-condition box (equal => fixed x0)
  Vec u_lo, u_hi;               // actuator limits (empty => unbounded)
  double theta_resample_period = 0.0; // > 0: re-draw theta every period (tracking tasks)
  GoalMetric goal_metric = GoalMetric::final_error;
  // MPC baseline defaults.
  int mpc_horizon = 5;
  double mpc_dt = 0.1;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

} // namespace rclbf
