#pragma once

// Small dense linear programs: maximize c'x subject to Gx <= h.
// Used offline for terminal-set redundancy tests, boundedness checks and
// Phase-I feasibility; problem sizes are a few variables and a few hundred rows.

#include <Eigen/Dense>

namespace cgmpc {

enum class LpStatus { Optimal, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

/// Active-set vertex method from a feasible start x0 (Bland-style tie breaking).
/// Throws std::invalid_argument if x0 violates Gx <= h by more than feas_tol.
LpResult lp_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                     const Eigen::VectorXd& x0, double feas_tol = 1e-9);

}  // namespace cgmpc
