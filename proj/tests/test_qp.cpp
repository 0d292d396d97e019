#include "rclbf/qp.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace rclbf;
namespace oracle = rclbf::testing;

TEST_CASE("unconstrained identity QP returns the origin") {
  QPProblem p;
  p.H = Mat::Identity(2, 2);
  p.c = Vec::Zero(2);
  p.A = Mat(0, 2);
  p.b = Vec(0);
  const QPSolution sol = solve(p);
  CHECK(sol.status == QPStatus::optimal);
  CHECK(sol.z.norm() <= 1e-12);
}

TEST_CASE("halfspace projection clips the unconstrained optimum") {
  // minimize ||z - (2,0)||^2 subject to z1 <= 1.
  QPProblem p;
  p.H = 2.0 * Mat::Identity(2, 2);
  p.c = Vec(2);
  p.c << -4.0, 0.0;
  p.A = Mat::Zero(1, 2);
  p.A(0, 0) = 1.0;
  p.b = Vec::Constant(1, 1.0);
  const QPSolution sol = solve(p);
  CHECK(sol.status == QPStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.z[1] == doctest::Approx(0.0).epsilon(1e-10));
  REQUIRE(sol.active_set.size() == 1);
  CHECK(sol.active_set[0] == 0);
  CHECK(kkt_residuals(p, sol).worst() <= 1e-8);
}

TEST_CASE("random QPs match the brute-force oracle and pass KKT checks") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dim_dist(1, 4), con_dist(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    CAPTURE(trial);
    const QPProblem p = oracle::random_qp(rng, dim_dist(rng), con_dist(rng));
    const QPSolution sol = solve(p);
    REQUIRE(sol.status == QPStatus::optimal);
    CHECK(kkt_residuals(p, sol).worst() <= 1e-8);
    const auto grid = oracle::brute_force_qp(p);
    REQUIRE(grid.feasible_found);
    CHECK(sol.objective <= grid.objective + 1e-4);
    CHECK(grid.objective <= sol.objective + 1e-4);
  }
}

TEST_CASE("detects infeasible constraint systems") {
  QPProblem p;
  p.H = Mat::Identity(1, 1);
  p.c = Vec::Zero(1);
  p.A = Mat(2, 1);
  p.A << 1.0, -1.0;
  p.b = Vec(2);
  p.b << -1.0, -1.0; // z <= -1 and z >= 1
  CHECK(solve(p).status == QPStatus::infeasible);
}

TEST_CASE("safety QP returns the reference when it is already admissible") {
  Vec u_nom(2);
  u_nom << 0.3, -0.7;
  std::vector<RclbfConstraint> cons;
  cons.push_back({-1.0, Vec::Zero(2)}); // -1 + 0'u <= r: satisfied at any u
  const RclbfQpResult res = solve_rclbf(u_nom, cons, 100.0, true);
  CHECK(res.status == QPStatus::optimal);
  CHECK((res.u - u_nom).norm() <= 1e-9);
  CHECK(res.relaxation <= 1e-9);
}

TEST_CASE("uncontrollable violations fall entirely on the relaxation") {
  // LgV = 0 for all scenarios and some LfV + lambda V = a > 0: r* = max a_i
  // once rho exceeds the dual threshold.
  Vec u_nom = Vec::Zero(2);
  std::vector<RclbfConstraint> cons;
  cons.push_back({0.4, Vec::Zero(2)});
  cons.push_back({1.3, Vec::Zero(2)});
  cons.push_back({-0.2, Vec::Zero(2)});
  const RclbfQpResult res = solve_rclbf(u_nom, cons, 1e4, true);
  CHECK(res.status == QPStatus::optimal);
  CHECK(res.relaxation == doctest::Approx(1.3).epsilon(1e-8));
  CHECK(res.u.norm() <= 1e-8);
}

TEST_CASE("single-scenario scalar case agrees with the grid oracle") {
  // Constraint 1 + u <= r, u_nom = 0, rho = 100: moving u is cheaper than
  // paying for r, so u = -1, r = 0.
  Vec u_nom = Vec::Zero(1);
  std::vector<RclbfConstraint> cons;
  Vec lgv(1);
  lgv << 1.0;
  cons.push_back({1.0, lgv});
  const RclbfQpResult res = solve_rclbf(u_nom, cons, 100.0, true);
  CHECK(res.u[0] == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(res.relaxation <= 1e-8);

  // Cross-check against brute force over (u, r >= 0).
  QPProblem p;
  p.H = Mat::Zero(2, 2);
  p.H(0, 0) = 1.0;
  p.c = Vec(2);
  p.c << 0.0, 100.0;
  p.A = Mat(2, 2);
  p.A << 1.0, -1.0, 0.0, -1.0;
  p.b = Vec(2);
  p.b << -1.0, 0.0;
  const auto grid = oracle::brute_force_qp(p);
  CHECK(std::abs(grid.z[0] - res.u[0]) <= 1e-3);
}

TEST_CASE("relaxation never grows when the penalty grows") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int ell = 1 + static_cast<int>(rng() % 3);
    Vec u_nom = Vec::NullaryExpr(ell, [&](Eigen::Index) { return gauss(rng); });
    std::vector<RclbfConstraint> cons;
    for (int i = 0; i < 4; ++i) {
      RclbfConstraint c;
      c.lhs = 2.0 * gauss(rng);
      c.lgv = Vec::NullaryExpr(ell, [&](Eigen::Index) { return gauss(rng); });
      cons.push_back(c);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double rho : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8}) {
      const RclbfQpResult res = solve_rclbf(u_nom, cons, rho, true);
      REQUIRE(res.status == QPStatus::optimal);
      CHECK(res.relaxation <= prev + 1e-7);
      prev = res.relaxation;
      // Feasible-set membership: every constraint holds within r.
      for (const auto& c : cons) CHECK(c.lhs + c.lgv.dot(res.u) <= res.relaxation + 1e-8);
    }
  }
}

TEST_CASE("warm start reproduces the cold-start optimum") {
  std::mt19937_64 rng(29);
  const QPProblem p = oracle::random_qp(rng, 3, 4);
  const QPSolution cold = solve(p);
  REQUIRE(cold.status == QPStatus::optimal);
  QPWarmStart warm;
  warm.z = p.H.ldlt().solve(-p.c); // unconstrained minimum, empty active set
  warm.active_set = {};
  warm.active_multipliers = Vec(0);
  const QPSolution hot = solve(p, warm);
  REQUIRE(hot.status == QPStatus::optimal);
  CHECK((hot.z - cold.z).norm() <= 1e-8);
}
