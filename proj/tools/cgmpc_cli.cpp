// cgmpc: run a tracking-MPC scenario with or without the computational
// governor and write steps.csv, summary.json, plots and a manifest.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cgmpc/report.hpp"
#include "cgmpc/scenario.hpp"
#include "cgmpc/simulate.hpp"

namespace fs = std::filesystem;
using namespace cgmpc;

namespace {

struct RunArgs {
  std::string config;
  std::string out;
  std::string mode = "both";
  int trials = 0;
  std::optional<std::uint64_t> seed;
  bool phase1_check = false;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json benchmark_json(const BenchmarkSummary& b) {
  auto mode_json = [](const ModeBenchmark& m) {
    return nlohmann::json{{"worst_time_mean_us", m.worst_time_mean_us},
                          {"worst_time_std_us", m.worst_time_std_us},
                          {"max_iterations_mean", m.max_iterations_mean},
                          {"max_iterations_std", m.max_iterations_std},
                          {"worst_time_us", m.worst_time_us},
                          {"max_iterations", m.max_iterations}};
  };
  return {{"trials", b.trials},
          {"governed", mode_json(b.governed)},
          {"ungoverned", mode_json(b.ungoverned)},
          {"iteration_ratio", b.iteration_ratio}};
}

int run(const RunArgs& args) {
  ScenarioConfig cfg = parse_config_file(args.config);
  if (args.seed) cfg.governor.rng_seed = *args.seed;
  if (args.phase1_check) cfg.phase1_check = true;

  std::vector<Mode> modes;
  if (args.mode == "both") {
    modes = {Mode::Governed, Mode::Ungoverned};
  } else {
    modes = {parse_mode(args.mode)};
  }

  const Controller ctl = build_controller(cfg);
  const fs::path out_dir = args.out;
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.config_path = fs::absolute(args.config).string();
  manifest.output_dir = fs::absolute(out_dir).string();
  manifest.trials = args.trials;
  manifest.seed = cfg.governor.rng_seed;
  manifest.phase1_check = cfg.phase1_check;
  for (Mode m : modes) manifest.modes.push_back(to_string(m));

  std::optional<BenchmarkSummary> bench;
  if (args.trials > 0) {
    bench = benchmark(ctl, cfg, args.trials);
    const fs::path p = out_dir / "benchmark.json";
    write_json(p, benchmark_json(*bench));
    manifest.add(p);
  }

  const StepDims dims{ctl.model.n(), ctl.model.n_u(), ctl.model.n_z(), ctl.eq.n_v()};
  for (Mode mode : modes) {
    const SimulationLog log = run_scenario(ctl, cfg, mode);
    const fs::path dir = out_dir / to_string(mode);
    fs::create_directories(dir);

    write_steps_csv(dir / "steps.csv", log.steps, dims);
    manifest.add(dir / "steps.csv");

    std::optional<ModeBenchmark> mb;
    if (bench) mb = mode == Mode::Governed ? bench->governed : bench->ungoverned;
    write_json(dir / "summary.json", summary_json(log, mb, args.trials));
    manifest.add(dir / "summary.json");

    for (const fs::path& p : write_plots(dir, log, ctl)) manifest.add(p);

    std::cout << to_string(mode) << ": steps=" << log.steps.size()
              << " max_iterations=" << log.summary.max_iterations
              << " mean_iterations=" << log.summary.mean_iterations
              << " settle_step=" << log.summary.settle_step << '\n';
  }
  if (bench) {
    std::cout << "benchmark (" << bench->trials << " trials): worst-case time governed "
              << bench->governed.worst_time_mean_us << " +/- " << bench->governed.worst_time_std_us
              << " us, ungoverned " << bench->ungoverned.worst_time_mean_us << " +/- "
              << bench->ungoverned.worst_time_std_us << " us, iteration ratio "
              << bench->iteration_ratio << '\n';
  }
  write_json(out_dir / "manifest.json", manifest.to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computationally governed tracking MPC"};
  app.require_subcommand(1);
  RunArgs args;
  std::uint64_t seed = 0;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario and write its artifacts");
  run_cmd->add_option("--config", args.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", args.out, "Output directory")->required();
  run_cmd->add_option("--mode", args.mode, "governed, ungoverned or both")
      ->check(CLI::IsMember({"governed", "ungoverned", "both"}));
  run_cmd->add_option("--trials", args.trials, "Benchmark trials (0 disables)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Governor RNG seed");
  run_cmd->add_flag("--phase1-check", args.phase1_check, "Check feasibility of a non-equilibrium x0");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) args.seed = seed;

  try {
    return run(args);
  } catch (const std::exception& e) {
    std::cerr << "cgmpc: error: " << e.what() << '\n';
    return 1;
  }
}
