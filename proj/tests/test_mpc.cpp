#include "rclbf/mpc.hpp"

#include "rclbf/linearize.hpp"
#include "rclbf/sim.hpp"
#include "rclbf/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace rclbf;

TEST_CASE("one-step unconstrained MPC matches the analytic minimizer") {
  // For N = 1 the condensed objective is
  //   1/2 du'(Bd'Q_N Bd + R)du + du'Bd'Q_N Ad dx0
  // with the exact discretization of the decay plant; solve it by hand.
  const auto sys = make_system("linear_test");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 1;
  cfg.dt = 0.1;
  Vec x0(2);
  x0 << 1.0, -0.5;

  const QPProblem qp = build_mpc_qp(*sys, cfg, x0);
  REQUIRE(qp.dim() == 2);
  REQUIRE(qp.num_constraints() == 0);

  // xdot = -x + u: Ad = e^{-dt} I, Bd = (1 - e^{-dt}) I.
  const double ad = std::exp(-0.1), bd = 1.0 - std::exp(-0.1);
  const Mat QN = cfg.terminal_weight * Mat::Identity(2, 2);
  const Mat H = bd * bd * QN + cfg.R;
  const Vec c = bd * QN * (ad * x0);
  const Vec du_expect = H.ldlt().solve(-c);

  const MpcResult res = mpc_control(*sys, cfg, x0);
  REQUIRE_FALSE(res.infeasible);
  CHECK((res.u - du_expect).norm() <= 1e-8); // u_goal = 0 for this plant
  const QPSolution sol = solve(qp);
  CHECK((sol.z - du_expect).norm() <= 1e-8);
}

TEST_CASE("condensed problem dimensions and constraint rows add up") {
  const auto sys = make_system("satellite"); // 3 scenario vertices, 2 controls
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 4;
  SUBCASE("control bounds only") {
    const QPProblem qp = build_mpc_qp(*sys, cfg, Vec::Zero(4));
    CHECK(qp.dim() == 2 * 4);
    // Two finite bounds per channel per step.
    CHECK(qp.num_constraints() == 2 * 2 * 4);
  }
  SUBCASE("state bounds multiply by the scenario count") {
    cfg.u_lo = cfg.u_hi = Vec(); // drop control bounds
    cfg.x_lo = Vec::Constant(4, -12.0);
    cfg.x_hi = Vec::Constant(4, 12.0);
    cfg.x_lo[2] = -std::numeric_limits<double>::infinity(); // skip one row pair
    cfg.x_hi[2] = std::numeric_limits<double>::infinity();
    const QPProblem qp = build_mpc_qp(*sys, cfg, Vec::Zero(4));
    const int vertices = sys->scenarios().count();
    CHECK(qp.num_constraints() == vertices * 4 /*steps*/ * 3 /*finite channels*/ * 2);
  }
}

TEST_CASE("MPC holds the goal with the equilibrium input") {
  for (const std::string& name : {"linear_test", "quadrotor2d"}) {
    CAPTURE(name);
    const auto sys = make_system(name);
    MPCConfig cfg = MPCConfig::from_preset(*sys);
    const MpcResult res = mpc_control(*sys, cfg, sys->task().x_goal);
    REQUIRE_FALSE(res.infeasible);
    const Vec f0 = sys->eval_f_nominal(sys->task().x_goal);
    const Mat g0 = sys->eval_g_nominal(sys->task().x_goal);
    CHECK((f0 + g0 * res.u).norm() <= 1e-6);
  }
}

TEST_CASE("receding-horizon MPC drives the decay plant to the origin") {
  const auto sys = make_system("linear_test");
  MPCConfig mpc_cfg = MPCConfig::from_preset(*sys);
  mpc_cfg.horizon = 5;
  mpc_cfg.dt = 0.1;
  const MpcController ctrl(sys, mpc_cfg);
  CHECK(ctrl.name() == "scenario_mpc");
  SimConfig sim_cfg = SimConfig::from_preset(sys->preset());
  sim_cfg.horizon = 3.0;
  Vec x0(2);
  x0 << 1.0, -1.0;
  const Trajectory traj = rollout(*sys, ctrl, sys->scenarios().nominal(), x0, sim_cfg);
  REQUIRE_FALSE(traj.diverged);
  CHECK(traj.final_goal_distance <= 1e-2);
}

TEST_CASE("control bounds are respected by the planned first move") {
  const auto sys = make_system("linear_test");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 3;
  cfg.u_lo = Vec::Constant(2, -0.2);
  cfg.u_hi = Vec::Constant(2, 0.2);
  Vec far(2);
  far << 1.5, -1.5;
  const MpcResult res = mpc_control(*sys, cfg, far);
  REQUIRE_FALSE(res.infeasible);
  CHECK(res.u.cwiseAbs().maxCoeff() <= 0.2 + 1e-9);
}

TEST_CASE("infeasible state constraints trigger the coasting fallback") {
  const auto sys = make_system("linear_test");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 2;
  // Require the state to jump outside what one bounded step can reach.
  cfg.u_lo = Vec::Constant(2, -0.01);
  cfg.u_hi = Vec::Constant(2, 0.01);
  cfg.x_lo = Vec::Constant(2, 5.0);
  cfg.x_hi = Vec::Constant(2, 6.0);
  const MpcResult res = mpc_control(*sys, cfg, Vec::Zero(2));
  CHECK(res.infeasible);
  CHECK(res.u.norm() == doctest::Approx(0.0));
}

TEST_CASE("scenario state constraints bind harder than nominal-only ones") {
  const auto sys = make_system("satellite");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 5;
  cfg.dt = 0.5;
  cfg.u_lo = cfg.u_hi = Vec();
  cfg.x_lo = Vec::Constant(4, -2.0);
  cfg.x_hi = Vec::Constant(4, 2.0);
  Vec x0(4);
  x0 << 1.8, 1.8, 0.5, -0.5;
  const QPProblem all = build_mpc_qp(*sys, cfg, x0);
  // The per-vertex constraint set contains the nominal rows, so the robust
  // optimum can never beat the nominal-only optimum.
  const QPSolution robust = solve(all);
  REQUIRE(robust.status == QPStatus::optimal);
  // Rebuild with a single-scenario stand-in: nominal vertex only.
  // (Constructed by solving over the same objective but only the first
  // qp-dimension-consistent third of the rows, which are the nominal rows.)
  const int per_vertex = all.num_constraints() / sys->scenarios().count();
  QPProblem nominal_only = all;
  nominal_only.A = all.A.topRows(per_vertex);
  nominal_only.b = all.b.head(per_vertex);
  const QPSolution loose = solve(nominal_only);
  REQUIRE(loose.status == QPStatus::optimal);
  CHECK(loose.objective <= robust.objective + 1e-9);
}

TEST_CASE("config validation catches shape and definiteness errors") {
  const auto sys = make_system("linear_test");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(*sys), std::invalid_argument);
  cfg = MPCConfig::from_preset(*sys);
  cfg.R = Mat::Zero(2, 2); // not PD
  CHECK_THROWS_AS(cfg.validate(*sys), std::invalid_argument);
  cfg = MPCConfig::from_preset(*sys);
  cfg.Q = Mat::Identity(3, 3);
  CHECK_THROWS_AS(cfg.validate(*sys), std::invalid_argument);
}

TEST_CASE("planning is deterministic") {
  const auto sys = make_system("satellite");
  MPCConfig cfg = MPCConfig::from_preset(*sys);
  Vec x0(4);
  x0 << 0.3, -5.0, 0.1, 0.0;
  const MpcResult a = mpc_control(*sys, cfg, x0);
  const MpcResult b = mpc_control(*sys, cfg, x0);
  CHECK((a.u - b.u).norm() == 0.0);
}
