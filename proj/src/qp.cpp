#include "rclbf/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>

namespace rclbf {
namespace {

constexpr double kReg = 1e-10;
constexpr double kTol = 1e-11;
constexpr int kDimCap = 256;
constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

QPSolution solve(const QPProblem& problem, const std::optional<QPWarmStart>& warm) {
  const int d = problem.dim();
  const int m = problem.num_constraints();
  check(d >= 1, "qp: empty problem");
  check(d <= kDimCap && m <= kDimCap, "qp: problem exceeds the dense-solver size cap");
  check(problem.H.rows() == d && problem.H.cols() == d, "qp: H must be d x d");
  check(m == 0 || (problem.A.rows() == m && problem.A.cols() == d), "qp: A must be m x d");
  check((problem.H - problem.H.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + problem.H.cwiseAbs().maxCoeff()),
        "qp: H must be symmetric");

  Mat H = problem.H + kReg * Mat::Identity(d, d);
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) {
    H = problem.H + 1e-8 * std::max(1.0, problem.H.diagonal().maxCoeff()) * Mat::Identity(d, d);
    llt.compute(H);
    check(llt.info() == Eigen::Success, "qp: H is not positive semidefinite");
  }

  QPSolution sol;
  sol.multipliers = Vec::Zero(std::max(m, 1));
  sol.multipliers.setZero();

  std::vector<int> active; // working set
  Vec lam;                 // multipliers of the working set
  if (warm.has_value()) {
    sol.z = warm->z;
    active = warm->active_set;
    lam = warm->active_multipliers;
  } else {
    sol.z = llt.solve(-problem.c);
    lam = Vec(0);
  }

  const int max_iter = 10 * (d + m);
  const auto finish = [&](QPStatus status) {
    sol.status = status;
    sol.active_set = active;
    if (m > 0) {
      sol.multipliers = Vec::Zero(m);
      for (size_t k = 0; k < active.size(); ++k) sol.multipliers[active[k]] = lam[static_cast<Eigen::Index>(k)];
    } else {
      sol.multipliers = Vec(0);
    }
    sol.objective = 0.5 * sol.z.dot(problem.H * sol.z) + problem.c.dot(sol.z);
    return sol;
  };

  if (m == 0) return finish(QPStatus::optimal);

  int iter = 0;
  while (true) {
    if (++iter > max_iter) return finish(QPStatus::max_iter);
    sol.iterations = iter;

    // Most violated inactive constraint; ties break to the lowest index.
    const Vec viol = problem.A * sol.z - problem.b;
    int p = -1;
    double worst = 1e-9;
    for (int i = 0; i < m; ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      if (viol[i] > worst + kTol) {
        worst = viol[i];
        p = i;
      }
    }
    if (p < 0) return finish(QPStatus::optimal);

    const Vec n_p = problem.A.row(p).transpose();
    double lam_p = 0.0;

    // Inner loop: drive the new constraint's multiplier up, dropping blocking
    // constraints along the way.
    while (true) {
      if (++iter > max_iter) return finish(QPStatus::max_iter);

      const int k = static_cast<int>(active.size());
      Vec dz, r;
      double q;
      const Vec Hin_p = llt.solve(n_p);
      if (k == 0) {
        r = Vec(0);
        dz = -Hin_p;
        q = n_p.dot(Hin_p);
      } else {
        Mat N(d, k);
        for (int j = 0; j < k; ++j) N.col(j) = problem.A.row(active[static_cast<size_t>(j)]).transpose();
        const Mat HinN = llt.solve(N);
        const Mat M = N.transpose() * HinN;
        r = M.ldlt().solve(N.transpose() * Hin_p);
        dz = HinN * r - Hin_p;
        q = n_p.dot(Hin_p) - (N.transpose() * Hin_p).dot(r);
      }

      // Blocking step from active multipliers decreasing to zero.
      double t1 = kInf;
      int blocker = -1;
      for (int j = 0; j < static_cast<int>(active.size()); ++j) {
        if (r.size() > j && r[j] > kTol) {
          const double t = lam[j] / r[j];
          if (t < t1 - kTol || (t < t1 + kTol && (blocker < 0 || active[static_cast<size_t>(j)] < active[static_cast<size_t>(blocker)]))) {
            t1 = t;
            blocker = j;
          }
        }
      }

      const double violation_p = problem.A.row(p).dot(sol.z) - problem.b[p];
      const double t2 = (q > kTol) ? violation_p / q : kInf;

      if (t1 == kInf && t2 == kInf) return finish(QPStatus::infeasible);

      const double t = std::min(t1, t2);
      sol.z += t * dz;
      for (int j = 0; j < static_cast<int>(active.size()); ++j) lam[j] -= t * r[j];
      lam_p += t;

      if (t2 <= t1) {
        // Constraint p becomes tight; admit it to the working set.
        active.push_back(p);
        Vec lam_new(active.size());
        lam_new.head(lam.size()) = lam;
        lam_new[static_cast<Eigen::Index>(active.size()) - 1] = lam_p;
        lam = lam_new;
        break;
      }
      // Partial step: drop the blocking constraint and continue.
      active.erase(active.begin() + blocker);
      Vec lam_new(active.size());
      for (int j = 0, w = 0; j < lam.size(); ++j)
        if (j != blocker) lam_new[w++] = lam[j];
      lam = lam_new;
    }
  }
}

KKTResiduals kkt_residuals(const QPProblem& problem, const QPSolution& solution) {
  KKTResiduals res;
  const Vec grad = problem.H * solution.z + problem.c +
                   (problem.num_constraints() > 0
                        ? Vec(problem.A.transpose() * solution.multipliers)
                        : Vec(Vec::Zero(problem.dim())));
  res.stationarity = grad.cwiseAbs().maxCoeff();
  if (problem.num_constraints() > 0) {
    const Vec slack = problem.A * solution.z - problem.b;
    res.primal = std::max(0.0, slack.maxCoeff());
    res.complementarity = (solution.multipliers.array() * slack.array()).abs().maxCoeff();
  }
  return res;
}

RclbfQpResult solve_rclbf(const Vec& u_nom, const std::vector<RclbfConstraint>& constraints,
                          double rho, bool allow_relax) {
  const int ell = static_cast<int>(u_nom.size());
  const int ns = static_cast<int>(constraints.size());
  for (const auto& cst : constraints) {
    check(std::isfinite(cst.lhs) && cst.lgv.allFinite(), "solve_rclbf: non-finite constraint row");
    check(cst.lgv.size() == ell, "solve_rclbf: constraint dimension mismatch");
  }

  RclbfQpResult out;
  if (!allow_relax) {
    QPProblem qp;
    qp.H = Mat::Identity(ell, ell);
    qp.c = -u_nom;
    qp.A = Mat(ns, ell);
    qp.b = Vec(ns);
    for (int i = 0; i < ns; ++i) {
      qp.A.row(i) = constraints[static_cast<size_t>(i)].lgv.transpose();
      qp.b[i] = -constraints[static_cast<size_t>(i)].lhs;
    }
    const QPSolution sol = solve(qp);
    out.status = sol.status;
    out.u = (sol.status == QPStatus::optimal) ? sol.z : u_nom;
    out.relaxation = 0.0;
    return out;
  }

  check(rho > 0.0, "solve_rclbf: rho must be positive when relaxation is allowed");
  check(ns <= 20, "solve_rclbf: too many scenario constraints for the exact relaxed solve");

  if (ns == 0) {
    out.status = QPStatus::optimal;
    out.u = u_nom;
    out.relaxation = 0.0;
    return out;
  }

  // Stage 1: try the unrelaxed QP. If it is feasible and the total constraint
  // pressure (sum of multipliers) stays below rho, adding the relaxation
  // variable cannot help: the full KKT system is already satisfied with r = 0.
  {
    QPProblem qp;
    qp.H = Mat::Identity(ell, ell);
    qp.c = -u_nom;
    qp.A = Mat(ns, ell);
    qp.b = Vec(ns);
    for (int i = 0; i < ns; ++i) {
      qp.A.row(i) = constraints[static_cast<size_t>(i)].lgv.transpose();
      qp.b[i] = -constraints[static_cast<size_t>(i)].lhs;
    }
    const QPSolution sol = solve(qp);
    if (sol.status == QPStatus::optimal &&
        sol.multipliers.sum() <= rho * (1.0 + 1e-9) + 1e-9) {
      out.status = QPStatus::optimal;
      out.u = sol.z;
      out.relaxation = 0.0;
      return out;
    }
  }

  // Stage 2: the optimum has r > 0 (or sits exactly on the rho budget), so the
  // multipliers satisfy sum(mu) = rho and u = u_nom - L mu with L the matrix of
  // active constraint gradients. Enumerate candidate active sets J and solve
  // the equality-constrained KKT system
  //     [ G_J  1 ] [mu_J]   [d_J]
  //     [ 1^T  0 ] [ r  ] = [rho],   G = L^T L,  d_i = lhs_i + lgv_i . u_nom,
  // keeping the best candidate that passes all KKT checks. Any such candidate
  // is a global optimum of this convex QP; comparing objectives only guards
  // against tolerance slop.
  Mat L(ell, ns);
  Vec dvec(ns);
  for (int i = 0; i < ns; ++i) {
    L.col(i) = constraints[static_cast<size_t>(i)].lgv;
    dvec[i] = constraints[static_cast<size_t>(i)].lhs + L.col(i).dot(u_nom);
  }
  const Mat G = L.transpose() * L;
  const double scale = std::max({1.0, dvec.cwiseAbs().maxCoeff(), G.cwiseAbs().maxCoeff()});

  double best_obj = kInf;
  Vec best_u;
  double best_r = 0.0;
  std::vector<int> J;
  for (unsigned mask = 1; mask < (1u << ns); ++mask) {
    J.clear();
    for (int i = 0; i < ns; ++i)
      if (mask & (1u << i)) J.push_back(i);
    const int k = static_cast<int>(J.size());

    Mat K = Mat::Zero(k + 1, k + 1);
    Vec rhs(k + 1);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) K(a, b) = G(J[static_cast<size_t>(a)], J[static_cast<size_t>(b)]);
      K(a, k) = 1.0;
      K(k, a) = 1.0;
      rhs[a] = dvec[J[static_cast<size_t>(a)]];
    }
    rhs[k] = rho;

    const Eigen::FullPivLU<Mat> lu(K);
    const Vec y = lu.solve(rhs);

    const Vec mu = y.head(k);
    const double r = y[k];
    if (!y.allFinite()) continue;
    if (r < -1e-9 * scale) continue;
    if ((mu.array() < -1e-9 * std::max(1.0, rho)).any()) continue;
    if (std::abs(mu.sum() - rho) > 1e-9 * std::max(1.0, rho)) continue;

    Vec u = u_nom;
    for (int a = 0; a < k; ++a) u -= mu[a] * L.col(J[static_cast<size_t>(a)]);

    // KKT checks on the recovered point itself: active rows tight at r,
    // inactive rows below it. This filters singular subsets regardless of how
    // the linear solve behaved.
    bool kkt_ok = true;
    for (int i = 0; i < ns && kkt_ok; ++i) {
      const double slack = constraints[static_cast<size_t>(i)].lhs + L.col(i).dot(u);
      if (mask & (1u << i))
        kkt_ok = std::abs(slack - r) <= 1e-8 * scale;
      else
        kkt_ok = slack <= r + 1e-8 * scale;
    }
    if (!kkt_ok) continue;

    const double r_clip = std::max(0.0, r);
    const double obj = 0.5 * (u - u_nom).squaredNorm() + rho * r_clip;
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
      best_r = r_clip;
    }
  }

  if (best_obj < kInf) {
    out.status = QPStatus::optimal;
    out.u = best_u;
    // Report the realized worst slack so feasibility is exact for the caller;
    // it matches the solved r up to the KKT tolerance.
    double worst = 0.0;
    for (int i = 0; i < ns; ++i)
      worst = std::max(worst, constraints[static_cast<size_t>(i)].lhs + L.col(i).dot(best_u));
    out.relaxation = std::max(best_r, worst);
  } else {
    out.status = QPStatus::max_iter;
    out.u = u_nom;
    out.relaxation = 0.0;
  }
  return out;
}

} // namespace rclbf
