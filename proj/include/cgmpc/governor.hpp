#pragma once

// Computational governor: picks the starting homotopy parameter eta and the
// reference step kappa so that the warm start is primal-dual feasible
// (|d|_inf <= 1) for the reference v + kappa (r - v).
//
// For fixed gamma the Newton direction of the condensed QP is affine in
// (1/sqrt(eta), kappa/sqrt(eta)):
//
//   d(eta, kappa) = d0 + d1 / sqrt(eta) + d2 kappa / sqrt(eta),
//
// so the selection is a two-variable LP in (s, kappa) with s = sqrt(eta).

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cgmpc/mpc_setup.hpp"

namespace cgmpc {

struct GovernorConfig {
  double c = 1.0;
  double eta_min = 1e-10;
  double eta_max = 1e-2;
  double eta_bar = 1e4;
  std::array<double, 2> sample_etas{1.0, 0.25};
  std::array<double, 2> sample_kappas{0.0, 1.0};
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument when a bound or sample constant is out of range.
  void validate() const;
};

/// Newton directions at (eta1, kappa1), (eta1, kappa2) and (eta2, kappa1).
struct SampledDirections {
  Vec d_hat1;
  Vec d_hat2;
  Vec d_hat3;
};

struct GovernorDecomposition {
  Vec d0, d1, d2;
  double d3_residual = 0.0;

  Vec direction(double eta, double kappa) const {
    const double w = 1.0 / std::sqrt(eta);
    return d0 + w * d1 + (w * kappa) * d2;
  }
};

/// alpha s + beta kappa <= delta, maximize kappa - c s over the box.
struct Lp2d {
  struct Row {
    double alpha;
    double beta;
    double delta;
  };
  std::vector<Row> rows;  // 2m rows from |d|_inf <= 1
  double c = 0.0;
  double s_min = 0.0;
  double s_max = 1.0;

  /// The d-rows followed by the four box rows.
  std::vector<Row> all_rows() const;
  double objective(double s, double kappa) const { return kappa - c * s; }
};

struct Lp2dSolution {
  double s = 0.0;
  double kappa = 0.0;
  double value = 0.0;
};

struct GovernorResult {
  double eta = 0.0;
  double kappa = 0.0;
  Vec v;
  bool fallback = false;
};

SampledDirections sample_newton_directions(const Vec& gamma_bar, const CondensedQP& qp,
                                           const Vec& x, const Vec& v, const Vec& r,
                                           const GovernorConfig& cfg);

GovernorDecomposition decompose(const SampledDirections& dirs, const GovernorConfig& cfg);

Lp2d build_lp(const GovernorDecomposition& dec, const GovernorConfig& cfg);

/// Randomized incremental (Seidel) solver; nullopt when the LP is infeasible.
std::optional<Lp2dSolution> seidel_solve(const Lp2d& lp, std::uint64_t seed);

/// One governor update. Falls back to (eta_bar, 0, v_prev) when the LP is infeasible.
GovernorResult govern(const Vec& gamma_bar, const CondensedQP& qp, const Vec& x,
                      const Vec& v_prev, const Vec& r, const GovernorConfig& cfg,
                      std::uint64_t step = 0);

}  // namespace cgmpc
