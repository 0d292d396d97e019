#pragma once

#include "rclbf/controller.hpp"
#include "rclbf/mlp.hpp"
#include "rclbf/system.hpp"

namespace rclbf {

/// A 2D section of the state space: two varying indices, everything else
/// fixed.
struct SectionSpec {
  int axis_i = 0;
  int axis_j = 1;
  double lo_i = -1.0, hi_i = 1.0;
  double lo_j = -1.0, hi_j = 1.0;
  int res_i = 50;
  int res_j = 50;
  Vec fixed; // full state vector providing the remaining coordinates

  void validate(int state_dim) const;
  Vec state_at(int gi, int gj) const;
};

enum class PolicySource { qp, policy_net };

/// Grid audit of the decrease condition over a state-space section. Two
/// violation channels are emitted: the definition's hinge including lambda V,
/// and the looser dV/dt-only diagnostic.
struct ViolationMap {
  SectionSpec section;
  double lambda = 0.0;
  int scenario_count = 0;
  PolicySource source = PolicySource::qp;
  // Row-major over (gi, gj).
  std::vector<double> v;                 // certificate value per cell
  std::vector<double> violation;         // sum_i [LfV + LgV u + lambda V]+
  std::vector<double> violation_dvdt;    // sum_i [LfV + LgV u]+
  std::vector<uint8_t> unsafe_cell;      // inside X_unsafe (excluded from stats)

  double max_violation(bool include_unsafe_cells = false) const;
  /// Fraction of non-unsafe cells with violation above tol.
  double violating_fraction(double tol = 1e-9) const;
  std::string to_csv() const;
};

ViolationMap violation_map(const Mlp& net, const Controller& controller, PolicySource source,
                           const SystemModel& system, const ControllerConfig& cfg,
                           const SectionSpec& section);

struct LevelSetReport {
  double safe_fraction = 0.0;   // safe samples with V <= c
  double unsafe_fraction = 0.0; // unsafe samples with V > c
  double max_safe_excess = 0.0;   // max over safe samples of V - c
  double max_unsafe_deficit = 0.0; // max over unsafe samples of c - V
  int n_safe = 0;
  int n_unsafe = 0;
};

/// Monte Carlo audit of the level-set conditions over N domain samples.
LevelSetReport level_set_report(const Mlp& net, const SystemModel& system, double c, int n,
                                uint64_t seed = 0);

struct GoalConditionReport {
  double v_goal = 0.0;          // V(x_goal)
  double min_outside_ball = 0.0; // min V over samples with ||x - x_goal|| > delta
  double delta = 0.0;
  bool positivity_ok = false;   // min_outside_ball > 0
};

GoalConditionReport goal_condition_report(const Mlp& net, const SystemModel& system,
                                          double delta = 0.1, int n = 100000, uint64_t seed = 0);

} // namespace rclbf
