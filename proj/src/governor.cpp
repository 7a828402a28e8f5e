#include "cgmpc/governor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cgmpc {

void GovernorConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(c >= 0.0)) fail("governor: c must be nonnegative");
  if (!(eta_min > 0.0 && eta_min < eta_max)) fail("governor: need 0 < eta_min < eta_max");
  if (!(eta_bar >= 1.0)) fail("governor: eta_bar must be at least 1");
  const auto [e1, e2] = sample_etas;
  const auto [k1, k2] = sample_kappas;
  if (!(e1 > 0.0 && e2 > 0.0) || e1 == e2) fail("governor: sample etas must be positive and distinct");
  if (!(k1 >= 0.0 && k1 <= 1.0 && k2 >= 0.0 && k2 <= 1.0) || k1 == k2) {
    fail("governor: sample kappas must be distinct and lie in [0, 1]");
  }
  const double w1 = 1.0 / std::sqrt(e1);
  const double w2 = 1.0 / std::sqrt(e2);
  const double b0 = -w2 / (w1 - w2);
  if (std::abs(1.0 - b0) < 1e-12) fail("governor: sample etas make the decomposition singular");
}

std::vector<Lp2d::Row> Lp2d::all_rows() const {
  std::vector<Row> out = rows;
  out.push_back({-1.0, 0.0, -s_min});
  out.push_back({1.0, 0.0, s_max});
  out.push_back({0.0, -1.0, 0.0});
  out.push_back({0.0, 1.0, 1.0});
  return out;
}

SampledDirections sample_newton_directions(const Vec& gamma_bar, const CondensedQP& qp,
                                           const Vec& x, const Vec& v, const Vec& r,
                                           const GovernorConfig& cfg) {
  const auto [eta1, eta2] = cfg.sample_etas;
  const auto [kappa1, kappa2] = cfg.sample_kappas;
  // One factorization of M' Phi M + H for all samples.
  const NewtonSystem sys(qp.H, qp.M, gamma_bar);
  const Vec v1 = v + kappa1 * (r - v);
  const Vec v2 = v + kappa2 * (r - v);
  const EtaLine at_k1 = sys.line(qp.linear_cost(x, v1), qp.offset(x, v1));
  const EtaLine at_k2 = sys.line(qp.linear_cost(x, v2), qp.offset(x, v2));
  return {at_k1.direction(eta1), at_k2.direction(eta1), at_k1.direction(eta2)};
}

GovernorDecomposition decompose(const SampledDirections& dirs, const GovernorConfig& cfg) {
  const auto [eta1, eta2] = cfg.sample_etas;
  const auto [kappa1, kappa2] = cfg.sample_kappas;
  const double a0 = -kappa2 / (kappa1 - kappa2);
  const double a1 = 1.0 / (kappa1 - kappa2);
  const double w1 = 1.0 / std::sqrt(eta1);
  const double w2 = 1.0 / std::sqrt(eta2);
  const double b0 = -w2 / (w1 - w2);
  const double b1 = 1.0 / (w1 - w2);
  if (std::abs(1.0 - b0) < 1e-12) throw std::invalid_argument("decompose: b0 == 1");

  const Vec& dh1 = dirs.d_hat1;
  const Vec& dh2 = dirs.d_hat2;
  const Vec& dh3 = dirs.d_hat3;
  // The fourth sample follows from d3 == 0.
  const Vec dh4 = (b0 / (1.0 - b0)) * (dh1 - dh2) + dh3;

  const Vec c1 = a0 * dh1 + (1.0 - a0) * dh2;
  const Vec c2 = a1 * (dh1 - dh2);
  const Vec c3 = a0 * dh3 + (1.0 - a0) * dh4;
  const Vec c4 = a1 * (dh3 - dh4);

  GovernorDecomposition dec;
  dec.d0 = b0 * c1 + (1.0 - b0) * c3;
  dec.d1 = b1 * (c1 - c3);
  dec.d2 = b1 * (c2 - c4);
  const Vec d3 = b0 * c2 + (1.0 - b0) * c4;
  dec.d3_residual = d3.size() ? d3.lpNorm<Eigen::Infinity>() : 0.0;
  const double scale = 1.0 + std::max({dh1.lpNorm<Eigen::Infinity>(), dh2.lpNorm<Eigen::Infinity>(),
                                        dh3.lpNorm<Eigen::Infinity>()});
  if (dec.d3_residual > 1e-8 * scale) {
    throw NumericError("decompose: kappa-only term does not vanish");
  }
  return dec;
}

Lp2d build_lp(const GovernorDecomposition& dec, const GovernorConfig& cfg) {
  Lp2d lp;
  lp.c = cfg.c;
  lp.s_min = std::sqrt(cfg.eta_min);
  lp.s_max = std::sqrt(cfg.eta_max);
  const auto m = dec.d0.size();
  lp.rows.reserve(static_cast<std::size_t>(2 * m));
  for (Eigen::Index i = 0; i < m; ++i) {
    // |d0 s + d1 + d2 kappa| <= s, split into two half-planes.
    lp.rows.push_back({dec.d0[i] - 1.0, dec.d2[i], -dec.d1[i]});
    lp.rows.push_back({-(dec.d0[i] + 1.0), -dec.d2[i], dec.d1[i]});
  }
  return lp;
}

namespace {

struct Half {
  double a0, a1, rhs;  // a0 s + a1 kappa <= rhs, (a0, a1) unit length
};

constexpr double kLpTol = 1e-12;

bool satisfies(const Half& h, double s, double k) {
  return h.a0 * s + h.a1 * k <= h.rhs + kLpTol * (1.0 + std::abs(h.rhs));
}

// Optimum of the LP restricted to the boundary line of `on`, subject to `rest`.
std::optional<std::array<double, 2>> solve_on_line(const Half& on, const std::vector<Half>& rest,
                                                   double obj_s, double obj_k) {
  const double x0 = on.a0 * on.rhs;
  const double y0 = on.a1 * on.rhs;
  const double dx = -on.a1;
  const double dy = on.a0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const Half& g : rest) {
    const double gd = g.a0 * dx + g.a1 * dy;
    const double slack = g.rhs - (g.a0 * x0 + g.a1 * y0);
    if (std::abs(gd) <= 1e-15) {
      if (slack < -kLpTol * (1.0 + std::abs(g.rhs))) return std::nullopt;
      continue;
    }
    const double t = slack / gd;
    if (gd > 0.0) {
      hi = std::min(hi, t);
    } else {
      lo = std::max(lo, t);
    }
  }
  if (lo > hi) {
    if (lo - hi > kLpTol * (1.0 + std::abs(lo) + std::abs(hi))) return std::nullopt;
    const double mid = 0.5 * (lo + hi);
    lo = hi = mid;
  }
  const double od = obj_s * dx + obj_k * dy;
  const double t = od > 0.0 ? hi : lo;
  return std::array<double, 2>{x0 + t * dx, y0 + t * dy};
}

}  // namespace

std::optional<Lp2dSolution> seidel_solve(const Lp2d& lp, std::uint64_t seed) {
  if (!(lp.s_min <= lp.s_max)) return std::nullopt;
  const double obj_s = -lp.c;
  const double obj_k = 1.0;

  std::vector<Half> box{{-1.0, 0.0, -lp.s_min}, {1.0, 0.0, lp.s_max}, {0.0, -1.0, 0.0},
                        {0.0, 1.0, 1.0}};
  std::vector<Half> rows;
  rows.reserve(lp.rows.size());
  for (const Lp2d::Row& r : lp.rows) {
    const double nrm = std::hypot(r.alpha, r.beta);
    if (nrm == 0.0 || !std::isfinite(nrm)) {
      if (r.delta < 0.0) return std::nullopt;
      continue;
    }
    rows.push_back({r.alpha / nrm, r.beta / nrm, r.delta / nrm});
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  std::shuffle(order.begin(), order.end(), gen);

  // Optimum over the box alone; ties on s resolve to the lower bound.
  double s = obj_s > 0.0 ? lp.s_max : lp.s_min;
  double k = 1.0;

  std::vector<Half> active = box;
  active.reserve(box.size() + rows.size());
  for (std::size_t idx : order) {
    const Half& row = rows[idx];
    if (!satisfies(row, s, k)) {
      const auto on_line = solve_on_line(row, active, obj_s, obj_k);
      if (!on_line) return std::nullopt;
      s = (*on_line)[0];
      k = (*on_line)[1];
    }
    active.push_back(row);
  }
  return Lp2dSolution{s, k, lp.objective(s, k)};
}

GovernorResult govern(const Vec& gamma_bar, const CondensedQP& qp, const Vec& x,
                      const Vec& v_prev, const Vec& r, const GovernorConfig& cfg,
                      std::uint64_t step) {
  const SampledDirections dirs = sample_newton_directions(gamma_bar, qp, x, v_prev, r, cfg);
  const GovernorDecomposition dec = decompose(dirs, cfg);
  const Lp2d lp = build_lp(dec, cfg);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed), static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::mt19937_64 mix(seq);
  const auto sol = seidel_solve(lp, mix());

  GovernorResult out;
  if (!sol) {
    out.eta = cfg.eta_bar;
    out.kappa = 0.0;
    out.v = v_prev;
    out.fallback = true;
    return out;
  }
  out.eta = sol->s * sol->s;
  out.kappa = std::clamp(sol->kappa, 0.0, 1.0);
  out.v = v_prev + out.kappa * (r - v_prev);
  return out;
}

}  // namespace cgmpc
