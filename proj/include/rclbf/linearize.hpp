#pragma once

#include "rclbf/system.hpp"

namespace rclbf {

struct Linearization {
  Mat A; // d(f + g u)/dx at (x0, u0), central finite differences
  Mat B; // g(x0, theta)
};

/// Linearizes the closed dynamics about (x0, u0). Throws on non-finite
/// derivatives (e.g. near a model singularity).
Linearization linearize(const SystemModel& system, const Vec& x0, const Vec& u0, const Vec& theta,
                        double step = 1e-5);

/// Solves the continuous algebraic Riccati equation
///   A'P + PA - P B R^-1 B' P + Q = 0
/// for the stabilizing P (Hamiltonian eigenvector method with Newton/Kleinman
/// refinement). Throws if no stabilizing solution is found or the scaled
/// residual exceeds 1e-8.
Mat care_solve(const Mat& A, const Mat& B, const Mat& Q, const Mat& R);

/// Continuous-time LQR gain K = R^-1 B' P. A - B K is guaranteed Hurwitz.
Mat lqr_gain(const Mat& A, const Mat& B, const Mat& Q, const Mat& R);

/// Scaled CARE residual ||A'P + PA - PBR^-1B'P + Q|| / max(1, ||Q||).
double care_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

} // namespace rclbf
