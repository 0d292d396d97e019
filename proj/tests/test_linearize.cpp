#include "rclbf/linearize.hpp"
#include "rclbf/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace rclbf;

TEST_CASE("satellite linearization recovers the exact relative-motion matrix") {
  const auto sys = make_system("satellite");
  const Linearization lin =
      linearize(*sys, Vec::Zero(4), Vec::Zero(2), sys->scenarios().nominal());
  const double n = 0.001027;
  Mat A = Mat::Zero(4, 4);
  A(0, 2) = 1.0;
  A(1, 3) = 1.0;
  A(2, 0) = 3.0 * n * n;
  A(2, 3) = 2.0 * n;
  A(3, 2) = -2.0 * n;
  CHECK((lin.A - A).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((lin.B.bottomRows(2) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear decay plant linearizes to minus identity") {
  const auto sys = make_system("linear_test");
  const Linearization lin =
      linearize(*sys, Vec::Zero(2), Vec::Zero(2), sys->scenarios().nominal());
  CHECK((lin.A + Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("2D quadrotor hover actuation hits only the velocity rows") {
  const auto sys = make_system("quadrotor2d");
  const Linearization lin =
      linearize(*sys, Vec::Zero(6), Vec::Zero(2), sys->scenarios().nominal());
  CHECK(lin.B.topRows(4).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(lin.B(4, 0) == doctest::Approx(1.0));
  CHECK(lin.B(5, 0) == doctest::Approx(25.0));
  CHECK(lin.B(5, 1) == doctest::Approx(-25.0));
}

TEST_CASE("scalar Riccati solutions match hand computations") {
  const Mat A0 = Mat::Zero(1, 1);
  const Mat B = Mat::Identity(1, 1);
  const Mat Q = Mat::Identity(1, 1);
  const Mat R = Mat::Identity(1, 1);
  // A = 0: -P^2 + 1 = 0 => P = 1, K = 1.
  CHECK(care_solve(A0, B, Q, R)(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(lqr_gain(A0, B, Q, R)(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  // A = 1: 2P - P^2 + 1 = 0 => P = 1 + sqrt(2).
  Mat A1 = Mat::Identity(1, 1);
  CHECK(care_solve(A1, B, Q, R)(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("LQR closes the loop stably on every linearizable preset") {
  for (const std::string& name : {"satellite", "linear_test", "segway", "quadrotor2d"}) {
    CAPTURE(name);
    const auto sys = make_system(name);
    // Linearize about the equilibrium input (hover thrust etc.), not u = 0.
    const Vec f0 = sys->eval_f_nominal(sys->task().x_goal);
    const Mat g0 = sys->eval_g_nominal(sys->task().x_goal);
    const Vec u0 = g0.colPivHouseholderQr().solve(-f0);
    const Linearization lin =
        linearize(*sys, sys->task().x_goal, u0, sys->scenarios().nominal());
    const Mat Q = Mat::Identity(sys->state_dim(), sys->state_dim());
    const Mat R = Mat::Identity(sys->control_dim(), sys->control_dim());
    const Mat K = lqr_gain(lin.A, lin.B, Q, R);
    const Mat Acl = lin.A - lin.B * K;
    const auto ev = Acl.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) CHECK(ev[i].real() < 0.0);
    const Mat P = care_solve(lin.A, lin.B, Q, R);
    CHECK(care_residual(lin.A, lin.B, Q, R, P) <= 1e-8);
  }
}

TEST_CASE("CARE rejects unstabilizable pairs") {
  // Unstable mode with zero actuation cannot be stabilized.
  Mat A(2, 2);
  A << 1, 0, 0, -1;
  Mat B(2, 1);
  B << 0, 1;
  CHECK_THROWS(care_solve(A, B, Mat::Identity(2, 2), Mat::Identity(1, 1)));
}
