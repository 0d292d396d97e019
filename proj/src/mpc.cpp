#include "rclbf/mpc.hpp"

#include "rclbf/linearize.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cmath>
#include <limits>

namespace rclbf {

MPCConfig MPCConfig::from_preset(const SystemModel& system) {
  MPCConfig cfg;
  cfg.horizon = system.preset().mpc_horizon;
  cfg.dt = system.preset().mpc_dt;
  cfg.Q = Mat::Identity(system.state_dim(), system.state_dim());
  cfg.R = 0.01 * Mat::Identity(system.control_dim(), system.control_dim());
  cfg.u_lo = system.preset().u_lo;
  cfg.u_hi = system.preset().u_hi;
  return cfg;
}

void MPCConfig::validate(const SystemModel& system) const {
  check(horizon >= 1, "mpc config: horizon must be >= 1");
  check(dt > 0.0, "mpc config: dt must be positive");
  check(Q.rows() == system.state_dim() && Q.cols() == system.state_dim(),
        "mpc config: Q must be n x n");
  check(R.rows() == system.control_dim() && R.cols() == system.control_dim(),
        "mpc config: R must be ell x ell");
  const Eigen::LLT<Mat> llt(R);
  check(llt.info() == Eigen::Success, "mpc config: R must be positive definite");
}

namespace {

struct Discrete {
  Mat Ad, Bd;
};

// Exact zero-order-hold discretization via the augmented matrix exponential.
Discrete discretize(const Mat& A, const Mat& B, double dt) {
  const int n = static_cast<int>(A.rows());
  const int ell = static_cast<int>(B.cols());
  Mat aug = Mat::Zero(n + ell, n + ell);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, ell) = B;
  const Mat e = (aug * dt).exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, ell)};
}

// Prediction matrices: dx_k = Sx[k] dx_0 + Su[k] z for the stacked control z.
struct Prediction {
  std::vector<Mat> Sx; // k = 1..N, each n x n
  std::vector<Mat> Su; // k = 1..N, each n x (ell N)
};

Prediction predict(const Discrete& d, int N) {
  const int n = static_cast<int>(d.Ad.rows());
  const int ell = static_cast<int>(d.Bd.cols());
  Prediction p;
  Mat Ak = d.Ad;
  Mat Su = Mat::Zero(n, ell * N);
  Su.leftCols(ell) = d.Bd;
  p.Sx.push_back(Ak);
  p.Su.push_back(Su);
  for (int k = 1; k < N; ++k) {
    Su = d.Ad * Su;
    Su.middleCols(ell * k, ell) = d.Bd;
    Ak = d.Ad * Ak;
    p.Sx.push_back(Ak);
    p.Su.push_back(Su);
  }
  return p;
}

struct GoalFrame {
  Vec x_goal, u_goal;
};

GoalFrame goal_frame(const SystemModel& system) {
  GoalFrame gf;
  gf.x_goal = system.task().x_goal;
  const Vec f0 = system.eval_f_nominal(gf.x_goal);
  const Mat g0 = system.eval_g_nominal(gf.x_goal);
  gf.u_goal = g0.colPivHouseholderQr().solve(-f0);
  return gf;
}

} // namespace

QPProblem build_mpc_qp(const SystemModel& system, const MPCConfig& cfg, const Vec& x_now) {
  cfg.validate(system);
  check(x_now.size() == system.state_dim() && x_now.allFinite(), "mpc: bad x_now");
  const int n = system.state_dim();
  const int ell = system.control_dim();
  const int N = cfg.horizon;
  const int dim = ell * N;

  const GoalFrame gf = goal_frame(system);
  const Vec dx0 = x_now - gf.x_goal;

  const auto& vertices = system.scenarios().vertices;
  std::vector<Prediction> preds;
  preds.reserve(vertices.size());
  for (const Vec& theta : vertices) {
    const Linearization lin = linearize(system, gf.x_goal, gf.u_goal, theta);
    preds.push_back(predict(discretize(lin.A, lin.B, cfg.dt), N));
  }

  // Objective over the nominal scenario's prediction.
  const Prediction& nom = preds[static_cast<size_t>(system.scenarios().nominal_index)];
  QPProblem qp;
  qp.H = Mat::Zero(dim, dim);
  qp.c = Vec::Zero(dim);
  for (int k = 0; k < N; ++k) {
    const Mat Qk = (k == N - 1) ? Mat(cfg.terminal_weight * cfg.Q) : cfg.Q;
    const Mat QSu = Qk * nom.Su[static_cast<size_t>(k)];
    qp.H += nom.Su[static_cast<size_t>(k)].transpose() * QSu;
    qp.c += QSu.transpose() * (nom.Sx[static_cast<size_t>(k)] * dx0);
    qp.H.block(ell * k, ell * k, ell, ell) += cfg.R;
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  // Constraint rows: control bounds per step, then state bounds per scenario
  // per step (skipping infinite bounds).
  std::vector<Vec> rows;
  std::vector<double> rhs;
  const auto add_row = [&](const Vec& a, double b) {
    rows.push_back(a);
    rhs.push_back(b);
  };
  if (cfg.u_lo.size() == ell || cfg.u_hi.size() == ell) {
    for (int k = 0; k < N; ++k)
      for (int j = 0; j < ell; ++j) {
        Vec a = Vec::Zero(dim);
        if (cfg.u_hi.size() == ell && std::isfinite(cfg.u_hi[j])) {
          a[ell * k + j] = 1.0;
          add_row(a, cfg.u_hi[j] - gf.u_goal[j]);
        }
        if (cfg.u_lo.size() == ell && std::isfinite(cfg.u_lo[j])) {
          a = Vec::Zero(dim);
          a[ell * k + j] = -1.0;
          add_row(a, gf.u_goal[j] - cfg.u_lo[j]);
        }
      }
  }
  if (cfg.x_lo.size() == n || cfg.x_hi.size() == n) {
    for (const Prediction& pred : preds)
      for (int k = 0; k < N; ++k) {
        const Vec drift = pred.Sx[static_cast<size_t>(k)] * dx0;
        for (int i = 0; i < n; ++i) {
          if (cfg.x_hi.size() == n && std::isfinite(cfg.x_hi[i]))
            add_row(pred.Su[static_cast<size_t>(k)].row(i).transpose(),
                    cfg.x_hi[i] - gf.x_goal[i] - drift[i]);
          if (cfg.x_lo.size() == n && std::isfinite(cfg.x_lo[i]))
            add_row(-pred.Su[static_cast<size_t>(k)].row(i).transpose(),
                    gf.x_goal[i] + drift[i] - cfg.x_lo[i]);
        }
      }
  }

  qp.A.resize(static_cast<Eigen::Index>(rows.size()), dim);
  qp.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    qp.A.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    qp.b[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  return qp;
}

MpcResult mpc_control(const SystemModel& system, const MPCConfig& cfg, const Vec& x_now) {
  const auto t0 = std::chrono::steady_clock::now();
  const QPProblem qp = build_mpc_qp(system, cfg, x_now);
  const QPSolution sol = solve(qp);

  MpcResult out;
  if (sol.status == QPStatus::infeasible) {
    // Matches the benchmark convention: no feasible plan => coast this step.
    out.u = Vec::Zero(system.control_dim());
    out.infeasible = true;
  } else {
    out.u = goal_frame(system).u_goal + sol.z.head(system.control_dim());
  }
  out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ControlResult MpcController::control(const Vec& x) const {
  const MpcResult res = mpc_control(*system_, cfg_, x);
  ControlResult out;
  out.u = res.u;
  out.solve_time = res.solve_time;
  out.infeasible = res.infeasible;
  return out;
}

} // namespace rclbf
