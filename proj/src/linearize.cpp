#include "rclbf/linearize.hpp"

#include <Eigen/Eigenvalues>

namespace rclbf {

Linearization linearize(const SystemModel& system, const Vec& x0, const Vec& u0, const Vec& theta,
                        double step) {
  const int n = system.state_dim();
  check(x0.size() == n, "linearize: x0 dimension mismatch");
  check(u0.size() == system.control_dim(), "linearize: u0 dimension mismatch");

  Mat A(n, n);
  for (int j = 0; j < n; ++j) {
    Vec xp = x0, xm = x0;
    xp[j] += step;
    xm[j] -= step;
    A.col(j) = (system.xdot(xp, u0, theta) - system.xdot(xm, u0, theta)) / (2.0 * step);
  }
  Mat B = system.eval_g(x0, theta);
  if (!A.allFinite() || !B.allFinite())
    throw std::runtime_error("linearize: non-finite derivative at the requested point");
  return {std::move(A), std::move(B)};
}

double care_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  const Mat Rinv = R.inverse();
  const Mat res = A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q;
  return res.norm() / std::max(1.0, Q.norm());
}

namespace {

// Solves A'X + XA = -C (Lyapunov) via the Kronecker linear system; fine for
// the small state dimensions used here.
Mat lyapunov_solve(const Mat& A, const Mat& C) {
  const int n = static_cast<int>(A.rows());
  Mat M = Mat::Zero(n * n, n * n);
  const Mat I = Mat::Identity(n, n);
  // vec(A'X + XA) = (I kron A' + A' kron I) vec(X)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        M(i * n + j, i * n + k) += A(k, j);          // (I kron A') block
        M(i * n + j, k * n + j) += A(k, i);          // (A' kron I) block
      }
  Vec rhs(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rhs[i * n + j] = -C(i, j);
  const Vec x = M.fullPivLu().solve(rhs);
  Mat X(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = x[i * n + j];
  return 0.5 * (X + X.transpose());
}

} // namespace

Mat care_solve(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const int n = static_cast<int>(A.rows());
  check(A.cols() == n && B.rows() == n, "care_solve: dimension mismatch");
  check(Q.rows() == n && Q.cols() == n, "care_solve: Q must be n x n");
  check(R.rows() == B.cols() && R.cols() == B.cols(), "care_solve: R must be ell x ell");

  const Mat Rinv = R.inverse();
  const Mat S = B * Rinv * B.transpose();

  // Hamiltonian eigenvector method: stable invariant subspace gives P.
  Mat H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  Eigen::ComplexEigenSolver<Mat> eig(H);
  check(eig.info() == Eigen::Success, "care_solve: eigen decomposition failed");

  Eigen::MatrixXcd X1(n, n), X2(n, n);
  int count = 0;
  for (int i = 0; i < 2 * n && count < n; ++i) {
    if (eig.eigenvalues()[i].real() < -1e-12) {
      X1.col(count) = eig.eigenvectors().col(i).head(n);
      X2.col(count) = eig.eigenvectors().col(i).tail(n);
      ++count;
    }
  }
  if (count < n)
    throw std::runtime_error("care_solve: Hamiltonian has too few stable eigenvalues "
                             "(pair may not be stabilizable/detectable)");
  Mat P = (X2 * X1.inverse()).real();
  P = 0.5 * (P + P.transpose());

  // Newton/Kleinman refinement.
  for (int it = 0; it < 20; ++it) {
    const Mat K = Rinv * B.transpose() * P;
    const Mat Acl = A - B * K;
    P = lyapunov_solve(Acl, Q + K.transpose() * R * K);
    if (care_residual(A, B, Q, R, P) <= 1e-10) break;
  }

  if (care_residual(A, B, Q, R, P) > 1e-8)
    throw std::runtime_error("care_solve: Riccati residual did not converge below tolerance");

  // Sanity: closed loop must be Hurwitz.
  const Mat Acl = A - B * (Rinv * B.transpose() * P);
  const auto ev = Acl.eigenvalues();
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i].real() >= 0.0)
      throw std::runtime_error("care_solve: closed loop is not Hurwitz");
  return P;
}

Mat lqr_gain(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const Mat P = care_solve(A, B, Q, R);
  return R.inverse() * B.transpose() * P;
}

} // namespace rclbf
