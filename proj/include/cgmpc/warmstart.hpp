#pragma once

// Warm start of the log-domain solver from the previous timestep's solution.

#include "cgmpc/mpc_setup.hpp"

namespace cgmpc {

inline constexpr double kDefaultSlackFloor = 1e-8;

struct WarmStart {
  Vec mu_bar;
  Vec s_bar;
  Vec gamma_bar;
  double eta_prev = 1.0;
};

/// Drops the first input of mu_prev and appends the LQR input at the end of
/// the predicted trajectory: u_bar(v) - K (xi_N - x_bar(v)).
Vec shift_primal(const Vec& mu_prev, const Vec& x_prev, const Vec& v, const PlantModel& model,
                 const TrackingDesign& design, const EquilibriumMap& eq);

/// gamma = -log(max(s / sqrt(eta_prev), eps_s)) elementwise.
Vec warm_gamma(const Vec& s_bar, double eta_prev, double eps_s = kDefaultSlackFloor);

/// Shift, evaluate the slack at theta = (x, v) and map it into the log domain.
WarmStart make_warm_start(const CondensedQP& qp, const Vec& mu_prev, const Vec& x_prev,
                          const Vec& x, const Vec& v_shift, const Vec& v_slack, double eta_prev,
                          const PlantModel& model, const TrackingDesign& design,
                          const EquilibriumMap& eq, double eps_s = kDefaultSlackFloor);

}  // namespace cgmpc
