// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cgmpc/governor.hpp"
#include "cgmpc/qp_ldipm.hpp"
#include "cgmpc/report.hpp"
#include "cgmpc/scenario.hpp"
#include "cgmpc/simulate.hpp"
#include "cgmpc/warmstart.hpp"
#include "oracles.hpp"

using namespace cgmpc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Demo {
  ScenarioConfig cfg;
  Controller ctl;
  SimulationLog governed;
  SimulationLog ungoverned;
};

const Demo& demo() {
  static const Demo d = [] {
    Demo out;
    out.cfg = parse_config_file(CGMPC_DEMO_CONFIG);
    out.ctl = build_controller(out.cfg);
    out.governed = run_scenario(out.ctl, out.cfg, Mode::Governed);
    out.ungoverned = run_scenario(out.ctl, out.cfg, Mode::Ungoverned);
    return out;
  }();
  return d;
}

struct SolvedQp {
  oracle::RandomQp q;
  SolveReport rep;
};

const std::vector<SolvedQp>& random_solves() {
  static const std::vector<SolvedQp> out = [] {
    std::vector<SolvedQp> v;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> pd(1, 6), md(1, 12);
    for (int i = 0; i < 100; ++i) {
      const int p = pd(rng);
      const int m = md(rng);
      SolvedQp s{oracle::random_qp(rng, p, m), {}};
      s.rep = longstep(QpProblem(s.q.H, s.q.c, s.q.A, s.q.b), Vec::Zero(m), 1.0, 1e-8);
      v.push_back(std::move(s));
    }
    return v;
  }();
  return out;
}

Outcome criterion1() {
  const double eta_f = 1e-8;
  double worst_gap = -1e300, worst_viol = 1e300;
  int bad = 0;
  for (const SolvedQp& s : random_solves()) {
    const auto m = s.q.A.rows();
    const auto ref = oracle::enumerate_active_sets(s.q.H, s.q.c, s.q.A, s.q.b);
    const QpProblem qp(s.q.H, s.q.c, s.q.A, s.q.b);
    const double gap = qp.objective(s.rep.z) - ref.value;
    const double viol = qp.slack(s.rep.z).minCoeff();
    worst_gap = std::max(worst_gap, gap - (m * eta_f + 1e-8));
    worst_viol = std::min(worst_viol, viol);
    if (!ref.feasible || s.rep.status != SolveStatus::Converged || gap > m * eta_f + 1e-8 || viol < -1e-9) ++bad;
  }
  return {bad == 0, fmt("100 QPs, %d failures, max(gap - bound) %.2e, min slack %.2e", bad, worst_gap, worst_viol)};
}

Outcome criterion2() {
  int bad = 0;
  double worst = 0.0;
  for (const SolvedQp& s : random_solves()) {
    const SolveReport& r = s.rep;
    const double m = static_cast<double>(r.d.size());
    const double lhs = r.s.cwiseProduct(r.lambda).lpNorm<1>();
    const double rhs = r.eta * (m - r.d.squaredNorm());
    const double err = std::abs(lhs - rhs);
    worst = std::max(worst, err / (1.0 + r.eta * m));
    if (r.d.lpNorm<Eigen::Infinity>() > 1.0 || r.s.minCoeff() < -1e-12 || r.lambda.minCoeff() < -1e-12 ||
        err > 1e-8 * (1.0 + r.eta * m)) {
      ++bad;
    }
  }
  return {bad == 0, fmt("%d failures, max relative identity error %.2e", bad, worst)};
}

Outcome criterion3() {
  const Demo& d = demo();
  const Controller& c = d.ctl;
  const GovernorConfig& cfg = d.cfg.governor;
  // Warm starts as the closed loop produces them, in both modes.
  struct Instance {
    Vec x, v, gamma;
  };
  std::vector<Instance> pool;
  for (Mode mode : {Mode::Governed, Mode::Ungoverned}) {
    ClosedLoopState st = initial_state(c, d.cfg);
    for (int k = 0; k < d.cfg.steps; ++k) {
      const StepResult res = step_closed_loop(st, c, d.cfg, mode);
      const ClosedLoopState& nx = res.next;
      const WarmStart ws = make_warm_start(c.qp, nx.mu_prev, nx.x_prev, nx.x, nx.v, nx.v, nx.eta_prev,
                                           c.model, c.design, c.eq, d.cfg.eps_s);
      pool.push_back({nx.x, nx.v, ws.gamma_bar});
      st = nx;
    }
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  double worst = 0.0, worst_d3 = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Instance& in = pool[pick(rng)];
    const Vec r = Vec::Constant(1, 3.5 * u(rng));
    const GovernorDecomposition dec =
        decompose(sample_newton_directions(in.gamma, c.qp, in.x, in.v, r, cfg), cfg);
    worst_d3 = std::max(worst_d3, dec.d3_residual);
    for (int k = 0; k < 20; ++k) {
      const double eta = std::exp(std::log(cfg.eta_min) + u01(rng) * std::log(cfg.eta_bar / cfg.eta_min));
      const double kappa = u01(rng);
      const Vec direct =
          newton_direction({in.gamma, eta}, c.qp.instantiate(in.x, in.v + kappa * (r - in.v))).d;
      const double err = (dec.direction(eta, kappa) - direct).lpNorm<Eigen::Infinity>() /
                         (1.0 + direct.lpNorm<Eigen::Infinity>());
      worst = std::max(worst, err);
    }
  }
  return {worst <= 1e-8 && worst_d3 <= 1e-8,
          fmt("50 closed-loop warm starts x 20 (eta, kappa): max scaled error %.2e, max d3 residual %.2e", worst,
              worst_d3)};
}

Outcome criterion4() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int verdict_mismatch = 0, feasible = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    Lp2d lp;
    lp.c = 2.0 * u(rng);
    lp.s_min = 0.1 * u(rng);
    lp.s_max = lp.s_min + 0.1 + u(rng);
    const int m = 1 + t % 20;
    for (int i = 0; i < m; ++i) lp.rows.push_back({g(rng), g(rng), 1.0 + g(rng)});
    std::vector<oracle::Lp2dRow> rows;
    for (const Lp2d::Row& r : lp.all_rows()) rows.push_back({r.alpha, r.beta, r.delta});
    const auto ref = oracle::vertex_enumeration(rows, lp.c);
    const auto sol = seidel_solve(lp, static_cast<std::uint64_t>(t));
    if (sol.has_value() != ref.feasible) {
      ++verdict_mismatch;
      continue;
    }
    if (sol) {
      ++feasible;
      worst = std::max(worst, std::abs(sol->value - ref.value));
    }
  }
  return {verdict_mismatch == 0 && worst <= 1e-9,
          fmt("200 LPs (%d feasible), %d verdict mismatches, max objective error %.2e", feasible,
              verdict_mismatch, worst)};
}

Outcome criterion5() {
  const Demo& d = demo();
  const Controller& c = d.ctl;
  const AugmentedLoop loop = augmented_loop(c.model, c.design, c.eq);
  const TerminalSet& T = c.terminal;
  const auto n = c.model.n();
  const int steps = 3 * std::max(T.k_star, 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int disagree = 0, compared = 0, members = 0, not_invariant = 0;
  for (int i = 0; i < 10000; ++i) {
    // Half the samples near the equilibrium manifold, half in a wide box.
    const double spread = i % 2 == 0 ? 0.3 : 1.0;
    Vec w(n + 1);
    const double v = 4.5 * u(rng);
    w << spread * 0.3 * u(rng), spread * 5.0 * u(rng), v + spread * 5.0 * u(rng), v;
    if (std::abs(T.margin(w)) <= 1e-6) continue;
    ++compared;
    const bool in_set = T.contains(w, 0.0);
    const bool in_sim = oracle::admissible_by_simulation(loop.Aw, loop.Cw, c.constraints.Y, c.constraints.h,
                                                         c.eq.Gy, d.cfg.terminal_epsilon, n, w, steps);
    disagree += in_set != in_sim;
    if (in_set) {
      ++members;
      not_invariant += !T.contains(loop.Aw * w, 1e-9);
    }
  }
  return {disagree == 0 && not_invariant == 0 && members > 0,
          fmt("k* = %d, %d points compared, %d members, %d disagreements, %d invariance failures", T.k_star,
              compared, members, disagree, not_invariant)};
}

Outcome criterion6() {
  const Demo& d = demo();
  int ones = 0, gov_max = 0;
  for (const StepLog& s : d.governed.steps) {
    ones += s.iterations == 1;
    gov_max = std::max(gov_max, s.iterations);
  }
  const double frac = static_cast<double>(ones) / static_cast<double>(d.governed.steps.size());
  const int ung_max = d.ungoverned.summary.max_iterations;
  return {frac >= 0.95 && ung_max > gov_max,
          fmt("governed: %.1f%% of %zu steps with exactly 1 iteration (max %d); ungoverned max %d", 100.0 * frac,
              d.governed.steps.size(), gov_max, ung_max)};
}

Outcome criterion7() {
  const Demo& d = demo();
  const auto t0 = std::chrono::steady_clock::now();
  const BenchmarkSummary b = benchmark(d.ctl, d.cfg, 100);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int gov = *std::max_element(b.governed.max_iterations.begin(), b.governed.max_iterations.end());
  const int ung = *std::max_element(b.ungoverned.max_iterations.begin(), b.ungoverned.max_iterations.end());
  return {gov <= 0.5 * ung,
          fmt("worst-case iterations %d vs %d (ratio %.3f); worst-case time %.1f +/- %.1f us vs %.1f +/- %.1f us "
              "over %d trials (%.1f s)",
              gov, ung, b.iteration_ratio, b.governed.worst_time_mean_us, b.governed.worst_time_std_us,
              b.ungoverned.worst_time_mean_us, b.ungoverned.worst_time_std_us, b.trials, secs)};
}

Outcome criterion8() {
  const Demo& d = demo();
  const Controller& c = d.ctl;
  std::string detail;
  bool pass = true;
  for (const SimulationLog* log : {&d.governed, &d.ungoverned}) {
    const std::string name = to_string(log->mode);
    // Margins, both as logged and recomputed from (x, u).
    double min_margin = 1e300;
    for (const StepLog& s : log->steps) {
      const Vec y = c.model.C * s.x + c.model.D * s.u;
      const double direct = (c.constraints.h - c.constraints.Y * y).minCoeff();
      min_margin = std::min({min_margin, s.constraint_margin, direct});
    }
    // Settling inside every constant-reference segment.
    std::vector<int> starts{0};
    for (std::size_t k = 1; k < log->steps.size(); ++k) {
      if (log->steps[k].r != log->steps[k - 1].r) starts.push_back(static_cast<int>(k));
    }
    starts.push_back(static_cast<int>(log->steps.size()));
    int unsettled = 0;
    std::string settle;
    for (std::size_t seg = 0; seg + 1 < starts.size(); ++seg) {
      int settled_at = -1;
      for (int k = starts[seg + 1] - 1; k >= starts[seg]; --k) {
        const StepLog& s = log->steps[static_cast<std::size_t>(k)];
        if ((s.z - s.r).norm() >= 1e-3) break;
        settled_at = k;
      }
      unsettled += settled_at < 0;
      settle += (settle.empty() ? "" : ",") + std::to_string(settled_at);
    }
    // Cost decrease while v is constant and the state is away from equilibrium.
    int increases = 0, checked = 0;
    for (std::size_t k = 1; k < log->steps.size(); ++k) {
      const StepLog& a = log->steps[k - 1];
      const StepLog& b = log->steps[k];
      if (a.v != b.v) continue;
      const Vec dx = a.x - c.eq.x_bar(a.v);
      if (std::sqrt(dx.dot(c.design.Q * dx)) <= 1e-6) continue;
      ++checked;
      increases += !(b.cost < a.cost);
    }
    pass = pass && min_margin >= -1e-8 && unsettled == 0 && increases == 0;
    detail += fmt("%s: min margin %.2e, settle steps [%s], cost increases %d/%d; ", name.c_str(), min_margin,
                  settle.c_str(), increases, checked);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Outcome criterion9() {
  const Demo& d = demo();
  const StepDims dims{d.ctl.model.n(), d.ctl.model.n_u(), d.ctl.model.n_z(), d.ctl.eq.n_v()};
  auto csv_without_time = [&](const SimulationLog& log) {
    std::stringstream ss;
    write_steps_csv(ss, log.steps, dims);
    std::string out, line;
    while (std::getline(ss, line)) out += line.substr(0, line.rfind(',')) + '\n';
    return out;
  };
  bool same = true;
  for (Mode mode : {Mode::Governed, Mode::Ungoverned}) {
    const std::string a = csv_without_time(run_scenario(d.ctl, d.cfg, mode));
    const std::string b = csv_without_time(run_scenario(build_controller(d.cfg), d.cfg, mode));
    same = same && a == b && !a.empty();
  }
  return {same, same ? "two runs per mode produce identical steps.csv apart from wall_time_us"
                     : "steps.csv differs between runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"solver correctness", criterion1},   {"certificate identity", criterion2},
      {"affine decomposition", criterion3}, {"seidel lp", criterion4},
      {"terminal set", criterion5},         {"single-iteration behavior", criterion6},
      {"computation reduction", criterion7}, {"closed-loop properties", criterion8},
      {"determinism", criterion9},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
