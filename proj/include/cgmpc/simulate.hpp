#pragma once

// Closed-loop simulation of warm start -> governor -> longstep, the
// ungoverned baseline, and the timing benchmark.

#include <optional>
#include <string>
#include <vector>

#include "cgmpc/governor.hpp"
#include "cgmpc/mpc_setup.hpp"
#include "cgmpc/warmstart.hpp"

namespace cgmpc {

enum class Mode { Governed, Ungoverned };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& s);

/// Truncation tolerance sigma ||x - Gx v||_Q^2 / m, clamped to [floor, cap].
struct EtaFPolicy {
  double sigma = 0.5;
  double floor = 1e-12;
  double cap = 1e-6;
};

struct ReferenceChange {
  double time = 0.0;
  Vec r;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PlantModel model;  // continuous-time (A, B) when `continuous` is set
  bool continuous = false;
  double T = 0.1;
  int N = 10;
  Mat Q, R;
  ConstraintPolyhedron constraints;
  double terminal_epsilon = 1e-6;
  int terminal_k_max = 500;
  GovernorConfig governor;
  std::vector<ReferenceChange> schedule;
  Vec v0;
  std::optional<Vec> x0;
  int steps = 200;
  EtaFPolicy eta_f;
  int max_iters = kDefaultMaxIters;
  double eps_s = kDefaultSlackFloor;
  double settle_tol = 1e-3;
  Mode mode = Mode::Governed;
  bool phase1_check = false;

  /// Reference in force at time t (v0 before the first change).
  Vec reference_at(double t) const;
};

/// Offline ingredients shared by every step and every trial.
struct Controller {
  PlantModel model;  // discrete time
  TrackingDesign design;
  EquilibriumMap eq;
  ConstraintPolyhedron constraints;
  TerminalSet terminal;
  CondensedQP qp;
};

/// Discretizes if needed and builds the design, terminal set and condensed QP.
/// Throws SetupError / std::invalid_argument on any violated assumption.
Controller build_controller(const ScenarioConfig& cfg);

struct StepLog {
  int k = 0;
  double t = 0.0;
  Vec x, u, z, v;
  double kappa = 0.0;
  double eta_start = 0.0;
  double eta_end = 0.0;
  double eta_f = 0.0;
  int iterations = 0;
  bool fallback = false;
  double constraint_margin = 0.0;
  double wall_time_us = 0.0;

  // Diagnostics, not part of steps.csv.
  Vec r;
  Vec mu;
  double cost = 0.0;
  double warm_slack_min = 0.0;
  bool converged = true;
};

struct SimulationSummary {
  int max_iterations = 0;
  double mean_iterations = 0.0;
  int settle_step = -1;  // -1 when the output never settles
  double worst_wall_time_us = 0.0;
};

struct SimulationLog {
  Mode mode = Mode::Governed;
  std::vector<StepLog> steps;
  SimulationSummary summary;
};

SimulationSummary summarize(const std::vector<StepLog>& steps, const Vec& r_final, double tol);

double eta_f_rule(const Vec& x, const Vec& v, Eigen::Index m, const Mat& Q,
                  const EquilibriumMap& eq, const EtaFPolicy& policy);

struct ClosedLoopState {
  int k = 0;
  Vec x;
  Vec v;        // reference applied at the previous step
  Vec mu_prev;  // previous solution; empty means cold start
  Vec x_prev;
  double eta_prev = 1.0;
  bool shift = true;  // false when mu_prev was computed at the current x
};

struct StepResult {
  ClosedLoopState next;
  StepLog log;
};

StepResult step_closed_loop(const ClosedLoopState& state, const Controller& ctl,
                            const ScenarioConfig& cfg, Mode mode);

/// State before step 0: x0 (default Gx v0) and, at equilibrium, a converged
/// solution of the initial problem to warm start from.
ClosedLoopState initial_state(const Controller& ctl, const ScenarioConfig& cfg);

/// Phase-I check: does some mu satisfy M mu + L theta + b > 0?
bool phase1_feasible(const CondensedQP& qp, const Vec& x, const Vec& v);

SimulationLog run_scenario(const Controller& ctl, const ScenarioConfig& cfg, Mode mode);
SimulationLog run_scenario(const ScenarioConfig& cfg);

struct ModeBenchmark {
  std::vector<double> worst_time_us;  // per trial
  std::vector<int> max_iterations;    // per trial
  double worst_time_mean_us = 0.0;
  double worst_time_std_us = 0.0;
  double max_iterations_mean = 0.0;
  double max_iterations_std = 0.0;
};

struct BenchmarkSummary {
  int trials = 0;
  ModeBenchmark governed;
  ModeBenchmark ungoverned;
  /// Governed worst-case iteration count over ungoverned worst-case.
  double iteration_ratio = 0.0;
};

BenchmarkSummary benchmark(const Controller& ctl, const ScenarioConfig& cfg, int trials);

}  // namespace cgmpc
