#include "rclbf/sim.hpp"

#include "rclbf/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace rclbf;

namespace {

/// Applies a fixed control regardless of the state.
class ConstantController : public Controller {
 public:
  explicit ConstantController(Vec u) : Controller("constant"), u_(std::move(u)) {}
  ControlResult control(const Vec&) const override { return {u_, 0.0, 0.0, false}; }

 private:
  Vec u_;
};

SimConfig basic_config(const SystemModel& sys, double horizon) {
  SimConfig cfg = SimConfig::from_preset(sys.preset());
  cfg.horizon = horizon;
  return cfg;
}

} // namespace

TEST_CASE("uncontrolled linear decay integrates to exp(-t)") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 1.0);
  const ConstantController zero(Vec::Zero(2));
  Vec x0(2);
  x0 << 1.0, -0.5;
  const Trajectory traj = rollout(*sys, zero, sys->scenarios().nominal(), x0, cfg);
  REQUIRE_FALSE(traj.diverged);
  const Vec xf = traj.x.back();
  CHECK(std::abs(xf[0] - std::exp(-1.0)) <= 1e-9);
  CHECK(std::abs(xf[1] - (-0.5) * std::exp(-1.0)) <= 1e-9);
  CHECK(traj.t.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the integrator converges at fourth order in the step size") {
  const auto sys = make_system("linear_test");
  const ConstantController zero(Vec::Zero(2));
  Vec x0(2);
  x0 << 1.0, 0.0;
  const auto error_at = [&](double h) {
    SimConfig cfg = basic_config(*sys, 1.0);
    cfg.dt_control = 0.5;
    cfg.dt_integrate = h;
    const Trajectory traj = rollout(*sys, zero, sys->scenarios().nominal(), x0, cfg);
    return std::abs(traj.x.back()[0] - std::exp(-1.0));
  };
  const double e1 = error_at(0.25);
  const double e2 = error_at(0.125);
  const double slope = std::log2(e1 / e2);
  CHECK(slope >= 3.7);
  CHECK(slope <= 4.3);
}

TEST_CASE("control saturation clamps channel by channel") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 0.1);
  cfg.u_lo = Vec::Constant(2, -1.0);
  cfg.u_hi = Vec::Constant(2, 1.0);
  Vec big(2);
  big << 10.0, -10.0;
  const ConstantController ctrl(big);
  const Trajectory traj = rollout(*sys, ctrl, sys->scenarios().nominal(), Vec::Zero(2), cfg);
  for (const Vec& u : traj.u) {
    CHECK(u[0] == doctest::Approx(1.0));
    CHECK(u[1] == doctest::Approx(-1.0));
  }
}

TEST_CASE("trajectory bookkeeping tracks goal distances and unsafe entry") {
  const auto sys = make_system("satellite");
  SimConfig cfg = basic_config(*sys, 0.5);
  const ConstantController zero(Vec::Zero(2));
  Vec x0(4);
  x0 << 0.6, 0.6, 0.0, 0.0; // inside the unsafe sector from the start
  REQUIRE(sys->task().unsafe(x0));
  const Trajectory traj = rollout(*sys, zero, sys->scenarios().nominal(), x0, cfg);
  CHECK(traj.entered_unsafe);
  CHECK(traj.min_goal_distance <= traj.final_goal_distance + 1e-12);
  CHECK(traj.max_goal_distance >= traj.final_goal_distance - 1e-12);
  CHECK(traj.min_goal_distance <= traj.max_goal_distance);
}

TEST_CASE("evaluation campaigns are deterministic in the seed") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 1.0);
  cfg.n_trials = 8;
  cfg.seed = 42;
  const ConstantController zero(Vec::Zero(2));
  const EvalReport a = evaluate(*sys, zero, cfg);
  const EvalReport b = evaluate(*sys, zero, cfg);
  REQUIRE(a.trials.size() == b.trials.size());
  CHECK(a.safety_rate == b.safety_rate);
  CHECK(a.goal_error == b.goal_error);
  for (size_t i = 0; i < a.trials.size(); ++i) {
    CHECK((a.trials[i].theta - b.trials[i].theta).norm() == 0.0);
    CHECK((a.trials[i].x0 - b.trials[i].x0).norm() == 0.0);
  }
}

TEST_CASE("compared controllers see identical trial draws") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 0.5);
  cfg.n_trials = 6;
  cfg.seed = 7;
  const ConstantController zero(Vec::Zero(2));
  const ConstantController push(Vec::Ones(2));
  const auto reports = compare_controllers(*sys, {&zero, &push}, cfg);
  REQUIRE(reports.size() == 2);
  REQUIRE(reports[0].trials.size() == reports[1].trials.size());
  for (size_t i = 0; i < reports[0].trials.size(); ++i) {
    CHECK((reports[0].trials[i].theta - reports[1].trials[i].theta).norm() == 0.0);
    CHECK((reports[0].trials[i].x0 - reports[1].trials[i].x0).norm() == 0.0);
  }
  // The single-controller campaign must match the comparison's draws too.
  const EvalReport solo = evaluate(*sys, zero, cfg);
  CHECK(solo.safety_rate == reports[0].safety_rate);
  CHECK(solo.goal_error == reports[0].goal_error);
}

TEST_CASE("trials that enter the unsafe set zero the safety rate") {
  const auto sys = make_system("satellite");
  SimConfig cfg = basic_config(*sys, 0.3);
  cfg.n_trials = 5;
  // Pin every start deep inside the unsafe sector.
  cfg.x0_lo = cfg.x0_hi = (Vec(4) << 0.6, 0.6, 0.0, 0.0).finished();
  const ConstantController zero(Vec::Zero(2));
  const EvalReport rep = evaluate(*sys, zero, cfg);
  CHECK(rep.safety_rate == doctest::Approx(0.0));
}

TEST_CASE("divergent dynamics are flagged instead of propagating non-finite states") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 5.0);
  // A huge constant input pushes the state far outside the domain scale.
  const ConstantController blast(Vec::Constant(2, 1e9));
  const Trajectory traj = rollout(*sys, blast, sys->scenarios().nominal(), Vec::Zero(2), cfg);
  CHECK(traj.diverged);
  for (const Vec& x : traj.x) CHECK(x.allFinite());
}

TEST_CASE("CSV schemas stay pinned") {
  const auto sys = make_system("linear_test");
  SimConfig cfg = basic_config(*sys, 0.1);
  cfg.n_trials = 2;
  const ConstantController zero(Vec::Zero(2));
  const Trajectory traj = rollout(*sys, zero, sys->scenarios().nominal(), Vec::Zero(2), cfg);
  const std::string tcsv = trajectory_csv(traj);
  CHECK(tcsv.rfind("t,", 0) == 0);
  const auto reports = compare_controllers(*sys, {&zero}, cfg);
  const std::string rcsv = report_csv(reports);
  CHECK(rcsv.rfind("controller,safety_rate,goal_error,goal_metric,mean_solve_time_ms,"
                   "median_solve_time_ms",
                   0) == 0);
  CHECK(comparison_text(reports).find("constant") != std::string::npos);
}
