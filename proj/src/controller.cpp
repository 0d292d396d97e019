#include "rclbf/controller.hpp"

#include "rclbf/linearize.hpp"

#include <chrono>

namespace rclbf {

LieDerivatives lie_derivatives(const Mlp& net, const SystemModel& system, const Vec& x,
                               int scenario_index) {
  check(scenario_index >= 0 && scenario_index < system.scenarios().count(),
        "lie_derivatives: scenario index out of range");
  const Vec& theta = system.scenarios().vertices[static_cast<size_t>(scenario_index)];
  const Vec grad = net.grad_V(x);
  LieDerivatives out;
  out.lfv = grad.dot(system.eval_f(x, theta));
  out.lgv = system.eval_g(x, theta).transpose() * grad;
  return out;
}

Vec nominal_control(const NominalPolicy& policy, const Vec& x) { return policy.eval(x); }

NominalPolicy make_nominal_policy(const SystemModel& system, double q_weight, double r_weight) {
  const int n = system.state_dim();
  const int ell = system.control_dim();
  NominalPolicy policy;
  policy.x_goal = system.task().x_goal;

  if (system.preset().nominal_zero) {
    policy.K = Mat::Zero(ell, n);
    policy.u_goal = Vec::Zero(ell);
    policy.equilibrium_residual = system.eval_f_nominal(policy.x_goal).norm();
    return policy;
  }

  // Least-squares equilibrium input at the goal under the nominal parameters.
  const Vec f0 = system.eval_f_nominal(policy.x_goal);
  const Mat g0 = system.eval_g_nominal(policy.x_goal);
  policy.u_goal = g0.colPivHouseholderQr().solve(-f0);
  policy.equilibrium_residual = (f0 + g0 * policy.u_goal).norm();

  const Linearization lin = linearize(system, policy.x_goal, policy.u_goal,
                                      system.scenarios().nominal());
  const Mat Q = q_weight * Mat::Identity(n, n);
  const Mat R = r_weight * Mat::Identity(ell, ell);
  policy.K = lqr_gain(lin.A, lin.B, Q, R);
  return policy;
}

ControlResult NominalController::control(const Vec& x) const {
  const auto t0 = std::chrono::steady_clock::now();
  ControlResult out;
  out.u = policy_.eval(x);
  out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ControlResult PolicyNetController::control(const Vec& x) const {
  const auto t0 = std::chrono::steady_clock::now();
  ControlResult out;
  out.u = policy_.eval_policy(x);
  out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

RclbfQpController::RclbfQpController(std::shared_ptr<const SystemModel> system, Mlp certificate,
                                     NominalPolicy reference, ControllerConfig cfg)
    : Controller("rclbf_qp"),
      system_(std::move(system)),
      certificate_(std::move(certificate)),
      reference_(std::move(reference)),
      cfg_(cfg) {
  check(system_ != nullptr, "rclbf controller: null system");
  check(certificate_.kind() == Mlp::Kind::certificate, "rclbf controller: wrong net kind");
  check(certificate_.input_dim() == system_->state_dim(),
        "rclbf controller: certificate input dimension mismatch");
  check(cfg_.lambda > 0.0 && cfg_.c > 0.0, "rclbf controller: lambda and c must be positive");
}

ControlResult RclbfQpController::control(const Vec& x) const {
  check(x.allFinite(), "rclbf controller: non-finite state");
  const auto t0 = std::chrono::steady_clock::now();

  const auto fw = certificate_.forward(x);
  const double v = certificate_.values_V(fw)[0];
  const Vec grad = certificate_.input_gradients_V(fw).col(0);

  const auto& sc = system_->scenarios();
  std::vector<RclbfConstraint> constraints;
  constraints.reserve(static_cast<size_t>(sc.count()));
  for (const Vec& theta : sc.vertices) {
    RclbfConstraint cst;
    cst.lhs = grad.dot(system_->eval_f(x, theta)) + cfg_.lambda * v;
    cst.lgv = system_->eval_g(x, theta).transpose() * grad;
    constraints.push_back(std::move(cst));
  }

  const Vec u_nom = reference_.eval(x);
  const RclbfQpResult qp = solve_rclbf(u_nom, constraints, cfg_.rho, cfg_.allow_relax);

  ControlResult out;
  out.u = qp.u;
  out.relaxation = qp.relaxation;
  out.infeasible = qp.status == QPStatus::infeasible;
  out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

} // namespace rclbf
