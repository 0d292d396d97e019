#pragma once

#include "rclbf/types.hpp"

#include <optional>

namespace rclbf {

/// Dense convex QP in standard form: minimize 1/2 z'Hz + c'z subject to
/// A z <= b. H must be symmetric PSD; semidefinite H is regularized by
/// +1e-10 I internally.
struct QPProblem {
  Mat H;
  Vec c;
  Mat A; // m x d, may have zero rows
  Vec b;

  int dim() const { return static_cast<int>(c.size()); }
  int num_constraints() const { return static_cast<int>(b.size()); }
};

enum class QPStatus { optimal, infeasible, max_iter };

struct QPSolution {
  Vec z;
  double objective = 0.0;
  std::vector<int> active_set;
  Vec multipliers; // length m, zero outside the active set
  QPStatus status = QPStatus::max_iter;
  int iterations = 0;
};

struct KKTResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double worst() const { return std::max({stationarity, primal, complementarity}); }
};

/// A dual-feasible starting point: z stationary for the given active set with
/// the given non-negative multipliers.
struct QPWarmStart {
  Vec z;
  std::vector<int> active_set;
  Vec active_multipliers;
};

/// Dual active-set solve (Goldfarb-Idnani scheme with dense refactorization;
/// intended for small problems, dimension cap 256). Ties between violated
/// constraints break toward the lowest index.
QPSolution solve(const QPProblem& problem, const std::optional<QPWarmStart>& warm = std::nullopt);

KKTResiduals kkt_residuals(const QPProblem& problem, const QPSolution& solution);

/// One row of the rCLBF decrease constraint: lhs + lgv'u <= relaxation,
/// where lhs = LfV_i + lambda V.
struct RclbfConstraint {
  double lhs;
  Vec lgv;
};

struct RclbfQpResult {
  Vec u;
  double relaxation = 0.0;
  QPStatus status = QPStatus::optimal;
};

/// Solves the per-step safety QP: minimize 1/2 ||u - u_nom||^2 + rho * r
/// subject to lhs_i + lgv_i'u <= r and r >= 0. With allow_relax = false the
/// relaxation is pinned to zero and infeasibility is reported to the caller.
RclbfQpResult solve_rclbf(const Vec& u_nom, const std::vector<RclbfConstraint>& constraints,
                          double rho, bool allow_relax);

} // namespace rclbf
