#include "cgmpc/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cgmpc/lp.hpp"

namespace cgmpc {

std::string to_string(Mode mode) {
  return mode == Mode::Governed ? "governed" : "ungoverned";
}

Mode parse_mode(const std::string& s) {
  if (s == "governed") return Mode::Governed;
  if (s == "ungoverned") return Mode::Ungoverned;
  throw std::invalid_argument("unknown mode '" + s + "' (expected governed or ungoverned)");
}

Vec ScenarioConfig::reference_at(double t) const {
  Vec r = v0;
  // Half-step slack so a change scheduled at k*T is picked up at step k.
  for (const ReferenceChange& c : schedule) {
    if (c.time <= t + 0.5 * T) r = c.r;
  }
  return r;
}

Controller build_controller(const ScenarioConfig& cfg) {
  Controller ctl;
  ctl.model = cfg.model;
  if (cfg.continuous) {
    auto [A, B] = discretize(cfg.model.A, cfg.model.B, cfg.T);
    ctl.model.A = std::move(A);
    ctl.model.B = std::move(B);
  }
  ctl.model.validate();
  cfg.governor.validate();
  ctl.constraints = cfg.constraints;
  ctl.constraints.validate(ctl.model.n_y());
  ctl.eq = equilibrium_basis(ctl.model);
  ctl.design = make_design(ctl.model, cfg.N, cfg.Q, cfg.R);
  ctl.terminal = max_admissible_set(ctl.model, ctl.design, ctl.eq, ctl.constraints,
                                    cfg.terminal_epsilon, cfg.terminal_k_max);
  if (!ctl.terminal.determined) {
    throw SetupError("terminal set not determined within k_max = " +
                     std::to_string(cfg.terminal_k_max) + " steps");
  }
  ctl.qp = condense(ctl.model, ctl.design, ctl.eq, ctl.constraints, ctl.terminal);
  return ctl;
}

double eta_f_rule(const Vec& x, const Vec& v, Eigen::Index m, const Mat& Q,
                  const EquilibriumMap& eq, const EtaFPolicy& policy) {
  const Vec dx = x - eq.x_bar(v);
  const double value = policy.sigma * dx.dot(Q * dx) / static_cast<double>(m);
  return std::clamp(value, policy.floor, policy.cap);
}

SimulationSummary summarize(const std::vector<StepLog>& steps, const Vec& r_final, double tol) {
  SimulationSummary s;
  if (steps.empty()) return s;
  long total = 0;
  for (const StepLog& st : steps) {
    s.max_iterations = std::max(s.max_iterations, st.iterations);
    total += st.iterations;
    s.worst_wall_time_us = std::max(s.worst_wall_time_us, st.wall_time_us);
  }
  s.mean_iterations = static_cast<double>(total) / static_cast<double>(steps.size());
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if ((it->z - r_final).norm() > tol) break;
    s.settle_step = it->k;
  }
  return s;
}

bool phase1_feasible(const CondensedQP& qp, const Vec& x, const Vec& v) {
  // maximize t subject to M mu + offset >= t, t <= 1, starting from mu = 0.
  const auto p = qp.num_vars();
  const auto m = qp.num_constraints();
  const Vec off = qp.offset(x, v);
  Mat G = Mat::Zero(m + 1, p + 1);
  G.topLeftCorner(m, p) = -qp.M;
  G.topRightCorner(m, 1).setOnes();
  G(m, p) = 1.0;
  Vec h(m + 1);
  h << off, 1.0;
  Vec start = Vec::Zero(p + 1);
  start[p] = std::min(1.0, off.minCoeff());
  Vec obj = Vec::Zero(p + 1);
  obj[p] = 1.0;
  const LpResult res = lp_maximize(obj, G, h, start);
  return res.status == LpStatus::Optimal && res.value > 1e-9;
}

ClosedLoopState initial_state(const Controller& ctl, const ScenarioConfig& cfg) {
  if (cfg.v0.size() != ctl.eq.n_v()) throw std::invalid_argument("v0 has wrong dimension");
  if (!reference_admissible(cfg.v0, ctl.eq, ctl.constraints)) {
    throw std::invalid_argument("v0 is not an admissible reference");
  }
  ClosedLoopState st;
  st.v = cfg.v0;
  const Vec x_eq = ctl.eq.x_bar(cfg.v0);
  st.x = cfg.x0.value_or(x_eq);
  if (st.x.size() != ctl.model.n()) throw std::invalid_argument("x0 has wrong dimension");
  const bool at_equilibrium = (st.x - x_eq).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + x_eq.norm());
  if (!at_equilibrium) {
    if (!cfg.phase1_check) {
      throw std::invalid_argument("x0 is not the equilibrium of v0; request a Phase-I check");
    }
    // Rows that no input can influence are not part of the condensed QP.
    const Mat YC = ctl.constraints.Y * ctl.model.C;
    const Mat YD = ctl.constraints.Y * ctl.model.D;
    for (Eigen::Index i = 0; i < YC.rows(); ++i) {
      if (YD.row(i).isZero(0.0) && YC.row(i).dot(st.x) >= ctl.constraints.h[i]) {
        throw std::invalid_argument("x0 violates a state constraint");
      }
    }
    if (!phase1_feasible(ctl.qp, st.x, st.v)) {
      throw std::invalid_argument("x0 failed the Phase-I feasibility check");
    }
    return st;  // cold start at step 0
  }
  // The controller has been resting at the equilibrium: converge the initial
  // problem once so step 0 is warm started.
  const QpProblem qp0 = ctl.qp.instantiate(st.x, st.v);
  const SolveReport rep = longstep(qp0, Vec::Zero(qp0.num_constraints()), cfg.governor.eta_bar,
                                   cfg.eta_f.floor, cfg.max_iters);
  st.mu_prev = rep.z;
  st.x_prev = st.x;
  st.eta_prev = rep.eta;
  st.shift = false;
  return st;
}

StepResult step_closed_loop(const ClosedLoopState& state, const Controller& ctl,
                            const ScenarioConfig& cfg, Mode mode) {
  using Clock = std::chrono::steady_clock;
  const CondensedQP& qp = ctl.qp;
  const auto nu = ctl.model.n_u();
  StepLog log;
  log.k = state.k;
  log.t = state.k * cfg.T;
  log.x = state.x;
  log.r = cfg.reference_at(log.t);

  const auto t0 = Clock::now();
  Vec gamma_bar;
  Vec v = state.v;
  double eta_start = cfg.governor.eta_bar;
  if (state.mu_prev.size() == 0) {
    gamma_bar = Vec::Zero(qp.num_constraints());
    if (mode == Mode::Ungoverned) v = log.r;
    log.warm_slack_min = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Vec v_next = mode == Mode::Ungoverned ? log.r : state.v;
    WarmStart ws;
    if (state.shift) {
      ws = make_warm_start(qp, state.mu_prev, state.x_prev, state.x, state.v, v_next,
                           state.eta_prev, ctl.model, ctl.design, ctl.eq, cfg.eps_s);
    } else {
      ws.mu_bar = state.mu_prev;
      ws.s_bar = qp.slack(ws.mu_bar, state.x, v_next);
      ws.eta_prev = state.eta_prev;
      ws.gamma_bar = warm_gamma(ws.s_bar, state.eta_prev, cfg.eps_s);
    }
    gamma_bar = std::move(ws.gamma_bar);
    log.warm_slack_min = ws.s_bar.minCoeff();
    if (mode == Mode::Governed) {
      const GovernorResult g = govern(gamma_bar, qp, state.x, state.v, log.r, cfg.governor,
                                      static_cast<std::uint64_t>(state.k));
      v = g.v;
      eta_start = g.eta;
      log.kappa = g.kappa;
      log.fallback = g.fallback;
    } else {
      v = log.r;
      const EtaStar star = eta_star(gamma_bar, qp.instantiate(state.x, v));
      if (const double* e = std::get_if<double>(&star)) {
        eta_start = std::min(cfg.governor.eta_bar, std::max(*e, cfg.governor.eta_min));
      }
    }
  }
  if (mode == Mode::Ungoverned) log.kappa = 1.0;

  const QpProblem qp_k = qp.instantiate(state.x, v);
  log.eta_f = eta_f_rule(state.x, v, qp.num_constraints(), cfg.Q, ctl.eq, cfg.eta_f);
  const SolveReport rep = longstep(qp_k, gamma_bar, eta_start, log.eta_f, cfg.max_iters);
  const auto t1 = Clock::now();

  log.v = v;
  log.eta_start = eta_start;
  log.eta_end = rep.eta;
  log.iterations = rep.iterations;
  log.converged = rep.status == SolveStatus::Converged;
  log.mu = rep.z;
  log.u = rep.z.head(nu);
  log.z = ctl.model.E * state.x + ctl.model.F * log.u;
  log.constraint_margin = qp.slack(rep.z, state.x, v).minCoeff();
  log.cost = tracking_cost(ctl.model, ctl.design, ctl.eq, state.x, v, rep.z);
  log.wall_time_us = std::chrono::duration<double, std::micro>(t1 - t0).count();

  StepResult out;
  out.next.k = state.k + 1;
  out.next.x = ctl.model.A * state.x + ctl.model.B * log.u;
  out.next.v = v;
  out.next.mu_prev = rep.z;
  out.next.x_prev = state.x;
  out.next.eta_prev = rep.eta;
  out.next.shift = true;
  out.log = std::move(log);
  return out;
}

SimulationLog run_scenario(const Controller& ctl, const ScenarioConfig& cfg, Mode mode) {
  for (const ReferenceChange& c : cfg.schedule) {
    if (!reference_admissible(c.r, ctl.eq, ctl.constraints)) {
      throw std::invalid_argument("reference at t = " + std::to_string(c.time) +
                                  " is not an admissible reference");
    }
  }
  SimulationLog out;
  out.mode = mode;
  out.steps.reserve(static_cast<std::size_t>(cfg.steps));
  ClosedLoopState st = initial_state(ctl, cfg);
  for (int k = 0; k < cfg.steps; ++k) {
    StepResult res = step_closed_loop(st, ctl, cfg, mode);
    out.steps.push_back(std::move(res.log));
    st = std::move(res.next);
  }
  out.summary = summarize(out.steps, cfg.reference_at(cfg.steps * cfg.T), cfg.settle_tol);
  return out;
}

SimulationLog run_scenario(const ScenarioConfig& cfg) {
  return run_scenario(build_controller(cfg), cfg, cfg.mode);
}

namespace {

void finish(ModeBenchmark& b) {
  const auto n = static_cast<double>(b.worst_time_us.size());
  if (n == 0) return;
  const double mt = std::accumulate(b.worst_time_us.begin(), b.worst_time_us.end(), 0.0) / n;
  const double mi = std::accumulate(b.max_iterations.begin(), b.max_iterations.end(), 0.0) / n;
  double vt = 0.0;
  double vi = 0.0;
  for (std::size_t i = 0; i < b.worst_time_us.size(); ++i) {
    vt += (b.worst_time_us[i] - mt) * (b.worst_time_us[i] - mt);
    vi += (b.max_iterations[i] - mi) * (b.max_iterations[i] - mi);
  }
  b.worst_time_mean_us = mt;
  b.max_iterations_mean = mi;
  b.worst_time_std_us = n > 1 ? std::sqrt(vt / (n - 1)) : 0.0;
  b.max_iterations_std = n > 1 ? std::sqrt(vi / (n - 1)) : 0.0;
}

}  // namespace

BenchmarkSummary benchmark(const Controller& ctl, const ScenarioConfig& cfg, int trials) {
  if (trials < 1) throw std::invalid_argument("benchmark: trials must be at least 1");
  BenchmarkSummary out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    for (Mode mode : {Mode::Governed, Mode::Ungoverned}) {
      const SimulationLog log = run_scenario(ctl, cfg, mode);
      ModeBenchmark& b = mode == Mode::Governed ? out.governed : out.ungoverned;
      b.worst_time_us.push_back(log.summary.worst_wall_time_us);
      b.max_iterations.push_back(log.summary.max_iterations);
    }
  }
  finish(out.governed);
  finish(out.ungoverned);
  const double ung = *std::max_element(out.ungoverned.max_iterations.begin(),
                                       out.ungoverned.max_iterations.end());
  const double gov = *std::max_element(out.governed.max_iterations.begin(),
                                       out.governed.max_iterations.end());
  out.iteration_ratio = ung > 0 ? gov / ung : 0.0;
  return out;
}

}  // namespace cgmpc
