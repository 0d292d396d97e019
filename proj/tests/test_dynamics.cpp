#include "rclbf/systems.hpp"

#include <doctest.h>

#include <random>

using namespace rclbf;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

} // namespace

TEST_CASE("satellite drift vanishes at the origin") {
  const auto sys = make_system("satellite");
  for (const Vec& theta : sys->scenarios().vertices)
    CHECK(sys->eval_f(Vec::Zero(4), theta).norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kinematic car error dynamics vanish at zero error under the nominal reference") {
  const auto sys = make_system("kinematic_car");
  const Vec f = sys->eval_f_nominal(Vec::Zero(5));
  CHECK(f.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("2D quadrotor drift follows the velocity/gravity pattern") {
  const auto sys = make_system("quadrotor2d");
  const Vec x = vec({0, 0, 0, 1, 2, 3});
  const Vec f = sys->eval_f_nominal(x);
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(2.0));
  CHECK(f[2] == doctest::Approx(3.0));
  CHECK(f[3] == doctest::Approx(0.0));
  CHECK(f[4] == doctest::Approx(-9.81));
  CHECK(f[5] == doctest::Approx(0.0));
}

TEST_CASE("2D quadrotor actuation columns at level attitude") {
  const auto sys = make_system("quadrotor2d");
  // Vertex with m = 1, I = 0.01: columns (0,0,0,0,1,25) and (0,0,0,0,1,-25).
  const Vec theta = vec({1.0, 100.0});
  const Mat g = sys->eval_g(Vec::Zero(6), theta);
  CHECK(g.col(0).head(4).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(g(4, 0) == doctest::Approx(1.0));
  CHECK(g(5, 0) == doctest::Approx(25.0));
  CHECK(g(4, 1) == doctest::Approx(1.0));
  CHECK(g(5, 1) == doctest::Approx(-25.0));
}

TEST_CASE("satellite actuation rows form the identity at unit mass") {
  const auto sys = make_system("satellite");
  const Mat g = sys->eval_g(Vec::Zero(4), vec({1.0}));
  CHECK(g.topRows(2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((g.bottomRows(2) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("every shipped system is affine in theta") {
  for (const std::string& name : benchmark_system_names()) {
    CAPTURE(name);
    const auto sys = make_system(name);
    const AffinityReport rep = check_affine_in_theta(*sys, 1000, /*seed=*/7);
    CHECK(rep.worst() <= 1e-10);
  }
}

TEST_CASE("the deliberately broken plant fails the affinity check") {
  const auto sys = make_system("broken_affine");
  const AffinityReport rep = check_affine_in_theta(*sys, 100, /*seed=*/7);
  CHECK(rep.worst() > 1e-3);
}

TEST_CASE("safe and unsafe predicates are disjoint and the goal is safe") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const std::string& name : benchmark_system_names()) {
    CAPTURE(name);
    const auto sys = make_system(name);
    const TaskSpec& task = sys->task();
    CHECK(task.safe(task.x_goal));
    CHECK_FALSE(task.unsafe(task.x_goal));
    for (int k = 0; k < 100000; ++k) {
      Vec x(sys->state_dim());
      for (int i = 0; i < sys->state_dim(); ++i)
        x[i] = task.lo[i] + unit(rng) * (task.hi[i] - task.lo[i]);
      if (task.safe(x)) REQUIRE_FALSE(task.unsafe(x));
    }
  }
}

TEST_CASE("scenario hulls contain their nominal parameters") {
  for (const std::string& name : benchmark_system_names()) {
    CAPTURE(name);
    const auto sys = make_system(name);
    CHECK(sys->scenarios().contains(sys->scenarios().nominal()));
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) CHECK(sys->scenarios().contains(sys->sample_theta(rng)));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const auto sys = make_system("satellite");
  CHECK_THROWS_AS(sys->eval_f(Vec::Zero(3), sys->scenarios().nominal()), std::invalid_argument);
  CHECK_THROWS_AS(sys->eval_g(Vec::Zero(4), Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("sideslip car reverts to the kinematic relations at low speed") {
  const auto sys = make_system("sideslip_car");
  // v = v_e + v_ref = 0.05: the tire rows must not blow up.
  Vec x = Vec::Zero(7);
  x[3] = -9.95;
  const Vec f = sys->eval_f_nominal(x);
  const Mat g = sys->eval_g_nominal(x);
  CHECK(f.allFinite());
  CHECK(g.allFinite());
}
