#pragma once

#include "rclbf/mlp.hpp"
#include "rclbf/qp.hpp"
#include "rclbf/system.hpp"

#include <memory>

namespace rclbf {

/// Lie derivatives of the certificate along one scenario's dynamics.
struct LieDerivatives {
  double lfv = 0.0; // grad V . f_theta_i(x)
  Vec lgv;          // g_theta_i(x)' grad V
};

LieDerivatives lie_derivatives(const Mlp& net, const SystemModel& system, const Vec& x,
                               int scenario_index);

/// Per-system safety-filter settings (level threshold c, decrease rate lambda,
/// relaxation penalty rho).
struct ControllerConfig {
  double lambda = 1.0;
  double c = 1.0;
  double rho = 100.0;
  bool allow_relax = true;

  static ControllerConfig from_preset(const SystemPreset& preset) {
    return {preset.lambda, preset.c, preset.relax_penalty, preset.allow_relax};
  }
};

/// Affine feedback u = u_goal - K (x - x_goal).
struct NominalPolicy {
  Mat K;
  Vec x_goal;
  Vec u_goal;
  /// ||f + g u_goal|| at the goal under the nominal parameters; nonzero when
  /// no control input makes the goal an exact fixed point.
  double equilibrium_residual = 0.0;

  Vec eval(const Vec& x) const { return u_goal - K * (x - x_goal); }
};

Vec nominal_control(const NominalPolicy& policy, const Vec& x);

/// Builds the nominal policy for a plant: u_goal from a least-squares
/// equilibrium solve at the goal, K from LQR on the nominal linearization.
/// Systems whose preset declares nominal_zero get K = 0, u_goal = 0.
NominalPolicy make_nominal_policy(const SystemModel& system, double q_weight = 1.0,
                                  double r_weight = 1.0);

/// One controller invocation: control, relaxation used, wall-clock time.
struct ControlResult {
  Vec u;
  double relaxation = 0.0;
  double solve_time = 0.0; // seconds
  bool infeasible = false;
};

/// Common interface for everything the simulator can run in closed loop.
class Controller {
 public:
  explicit Controller(std::string name) : name_(std::move(name)) {}
  virtual ~Controller() = default;

  const std::string& name() const { return name_; }
  virtual ControlResult control(const Vec& x) const = 0;

 private:
  std::string name_;
};

/// Plain nominal feedback (no safety filter).
class NominalController : public Controller {
 public:
  explicit NominalController(NominalPolicy policy)
      : Controller("nominal"), policy_(std::move(policy)) {}

  ControlResult control(const Vec& x) const override;

 private:
  NominalPolicy policy_;
};

/// Runs the learned policy network directly.
class PolicyNetController : public Controller {
 public:
  explicit PolicyNetController(Mlp policy) : Controller("policy_net"), policy_(std::move(policy)) {}

  ControlResult control(const Vec& x) const override;

 private:
  Mlp policy_;
};

/// The certificate-based safety filter: per-scenario decrease constraints
/// around a reference control, solved as a QP at every step. Immutable after
/// construction; control() is pure and concurrent-safe.
class RclbfQpController : public Controller {
 public:
  RclbfQpController(std::shared_ptr<const SystemModel> system, Mlp certificate,
                    NominalPolicy reference, ControllerConfig cfg);

  ControlResult control(const Vec& x) const override;

  const Mlp& certificate() const { return certificate_; }
  const ControllerConfig& config() const { return cfg_; }
  const NominalPolicy& reference() const { return reference_; }

 private:
  std::shared_ptr<const SystemModel> system_;
  Mlp certificate_;
  NominalPolicy reference_;
  ControllerConfig cfg_;
};

} // namespace rclbf
