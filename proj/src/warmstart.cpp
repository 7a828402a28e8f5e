#include "cgmpc/warmstart.hpp"

#include <stdexcept>

namespace cgmpc {

Vec shift_primal(const Vec& mu_prev, const Vec& x_prev, const Vec& v, const PlantModel& model,
                 const TrackingDesign& design, const EquilibriumMap& eq) {
  const auto nu = model.n_u();
  const int N = design.N;
  const std::vector<Vec> xi = predict_states(model, x_prev, mu_prev, N);
  Vec mu_bar(nu * N);
  mu_bar.head(nu * (N - 1)) = mu_prev.tail(nu * (N - 1));
  mu_bar.tail(nu) = eq.u_bar(v) - design.K * (xi.back() - eq.x_bar(v));
  return mu_bar;
}

Vec warm_gamma(const Vec& s_bar, double eta_prev, double eps_s) {
  if (!(eta_prev > 0.0) || !(eps_s > 0.0)) {
    throw std::invalid_argument("warm_gamma: eta_prev and eps_s must be positive");
  }
  const double r = std::sqrt(eta_prev);
  return -((s_bar.array() / r).max(eps_s)).log();
}

WarmStart make_warm_start(const CondensedQP& qp, const Vec& mu_prev, const Vec& x_prev,
                          const Vec& x, const Vec& v_shift, const Vec& v_slack, double eta_prev,
                          const PlantModel& model, const TrackingDesign& design,
                          const EquilibriumMap& eq, double eps_s) {
  WarmStart ws;
  ws.mu_bar = shift_primal(mu_prev, x_prev, v_shift, model, design, eq);
  ws.s_bar = qp.slack(ws.mu_bar, x, v_slack);
  ws.eta_prev = eta_prev;
  ws.gamma_bar = warm_gamma(ws.s_bar, eta_prev, eps_s);
  return ws;
}

}  // namespace cgmpc
