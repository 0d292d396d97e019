#pragma once

#include "rclbf/controller.hpp"
#include "rclbf/qp.hpp"
#include "rclbf/system.hpp"

namespace rclbf {

/// Scenario-based linear MPC settings. The plant is linearized about the goal
/// under each scenario vertex and discretized exactly (matrix exponential);
/// state constraints are replicated per vertex, the objective uses the
/// nominal vertex.
struct MPCConfig {
  int horizon = 5;
  double dt = 0.1;
  Mat Q; // state cost, n x n, PSD
  Mat R; // control cost, ell x ell, PD
  double terminal_weight = 10.0; // terminal cost = weight * Q
  Vec u_lo, u_hi; // per-channel control bounds (empty => none)
  Vec x_lo, x_hi; // per-channel state bounds; infinities skip the row

  static MPCConfig from_preset(const SystemModel& system);
  void validate(const SystemModel& system) const;
};

/// Condensed QP over the control sequence [du_0; ...; du_{N-1}] in deviation
/// coordinates about the goal equilibrium.
QPProblem build_mpc_qp(const SystemModel& system, const MPCConfig& cfg, const Vec& x_now);

struct MpcResult {
  Vec u;
  double solve_time = 0.0;
  bool infeasible = false;
};

MpcResult mpc_control(const SystemModel& system, const MPCConfig& cfg, const Vec& x_now);

/// Receding-horizon wrapper for the simulator.
class MpcController : public Controller {
 public:
  MpcController(std::shared_ptr<const SystemModel> system, MPCConfig cfg)
      : Controller("scenario_mpc"), system_(std::move(system)), cfg_(std::move(cfg)) {
    cfg_.validate(*system_);
  }

  ControlResult control(const Vec& x) const override;

 private:
  std::shared_ptr<const SystemModel> system_;
  MPCConfig cfg_;
};

} // namespace rclbf
