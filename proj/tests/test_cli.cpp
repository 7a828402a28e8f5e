#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgmpc/report.hpp"
#include "cgmpc/scenario.hpp"
#include "cgmpc/simulate.hpp"

using namespace cgmpc;
namespace fs = std::filesystem;

namespace {

nlohmann::json demo_json() {
  std::ifstream in(CGMPC_DEMO_CONFIG);
  return nlohmann::json::parse(in);
}

std::string error_of(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cgmpc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, DemoParses) {
  const ScenarioConfig cfg = parse_config_file(CGMPC_DEMO_CONFIG);
  EXPECT_EQ(cfg.N, 10);
  EXPECT_DOUBLE_EQ(cfg.T, 0.1);
  EXPECT_EQ(cfg.model.n(), 3);
  EXPECT_EQ(cfg.model.n_u(), 1);
  EXPECT_EQ(cfg.Q(2, 2), 10.0);
  EXPECT_EQ(cfg.R(0, 0), 1.0);
  EXPECT_EQ(cfg.governor.c, 1.0);
  EXPECT_EQ(cfg.governor.eta_min, 1e-10);
  EXPECT_EQ(cfg.governor.eta_max, 1e-2);
  ASSERT_EQ(cfg.schedule.size(), 2u);
}

TEST(Config, RejectsIndefiniteStateWeight) {
  nlohmann::json j = demo_json();
  j["Q"] = {{1, 0, 0}, {0, -1, 0}, {0, 0, 10}};
  EXPECT_NE(error_of(j).find("positive definite"), std::string::npos) << error_of(j);
}

TEST(Config, RejectsInadmissibleReference) {
  nlohmann::json j = demo_json();
  j["reference"]["schedule"][0]["r"] = {5.0};
  const std::string e = error_of(j);
  EXPECT_NE(e.find("admissible reference set"), std::string::npos) << e;
  EXPECT_NE(e.find("schedule[0]"), std::string::npos) << e;
  j = demo_json();
  j["reference"]["schedule"][0]["r"] = {4.0};  // on the boundary
  EXPECT_FALSE(error_of(j).empty());
}

TEST(Config, RejectsMissingAndMistypedFields) {
  nlohmann::json j = demo_json();
  j.erase("horizon");
  EXPECT_NE(error_of(j).find("horizon"), std::string::npos);
  j = demo_json();
  j["sample_period"] = "fast";
  EXPECT_NE(error_of(j).find("sample_period"), std::string::npos);
  j = demo_json();
  j["plant"]["type"] = "tricycle";
  EXPECT_NE(error_of(j).find("plant.type"), std::string::npos);
  EXPECT_THROW(parse_config_file("/nonexistent/config.json"), ConfigError);
}

TEST(Config, MatrixPlantMatchesBicycle) {
  nlohmann::json j = demo_json();
  const PlantModel bike = bicycle_model(BicycleParameters{});
  auto rows = [](const Mat& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(row);
    }
    return out;
  };
  j["plant"] = {{"type", "matrices"}, {"continuous", true}, {"A", rows(bike.A)}, {"B", rows(bike.B)},
                {"C", rows(bike.C)},  {"D", rows(bike.D)},   {"E", rows(bike.E)}, {"F", rows(bike.F)}};
  const ScenarioConfig a = parse_config(j);
  const ScenarioConfig b = parse_config(demo_json());
  EXPECT_EQ(a.model.A, b.model.A);
  EXPECT_EQ(a.model.B, b.model.B);
  EXPECT_EQ(a.continuous, b.continuous);
}

TEST(Report, CsvRoundTrip) {
  ScenarioConfig cfg = parse_config_file(CGMPC_DEMO_CONFIG);
  cfg.steps = 30;
  const Controller ctl = build_controller(cfg);
  const SimulationLog log = run_scenario(ctl, cfg, Mode::Governed);
  const StepDims dims{ctl.model.n(), ctl.model.n_u(), ctl.model.n_z(), ctl.eq.n_v()};
  std::stringstream ss;
  write_steps_csv(ss, log.steps, dims);
  const std::vector<StepLog> back = read_steps_csv(ss, dims);
  ASSERT_EQ(back.size(), log.steps.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const StepLog& a = log.steps[i];
    const StepLog& b = back[i];
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.t, b.t);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.z, b.z);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.kappa, b.kappa);
    EXPECT_EQ(a.eta_start, b.eta_start);
    EXPECT_EQ(a.eta_end, b.eta_end);
    EXPECT_EQ(a.eta_f, b.eta_f);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.fallback, b.fallback);
    EXPECT_EQ(a.constraint_margin, b.constraint_margin);
    EXPECT_EQ(a.wall_time_us, b.wall_time_us);
  }
  const auto header = steps_csv_header(dims);
  EXPECT_EQ(header.front(), "k");
  EXPECT_EQ(header.back(), "wall_time_us");
}

TEST(Report, SummaryJson) {
  SimulationLog log;
  log.summary.max_iterations = 3;
  log.summary.settle_step = -1;
  const nlohmann::json j = summary_json(log);
  EXPECT_EQ(j["max_iterations"], 3);
  EXPECT_TRUE(j["settle_step"].is_null());
}

TEST(Report, Sha256KnownVector) {
  const fs::path dir = scratch_dir("sha");
  std::ofstream(dir / "abc.txt") << "abc";
  EXPECT_EQ(sha256_file(dir / "abc.txt"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}

TEST(Report, ManifestHashesAreRecomputable) {
  ScenarioConfig cfg = parse_config_file(CGMPC_DEMO_CONFIG);
  cfg.steps = 20;
  const Controller ctl = build_controller(cfg);
  const SimulationLog log = run_scenario(ctl, cfg, Mode::Ungoverned);
  const fs::path dir = scratch_dir("manifest");
  RunManifest m;
  m.output_dir = dir.string();
  write_steps_csv(dir / "steps.csv", log.steps,
                  StepDims{ctl.model.n(), ctl.model.n_u(), ctl.model.n_z(), ctl.eq.n_v()});
  m.add(dir / "steps.csv");
  for (const fs::path& p : write_plots(dir, log, ctl)) m.add(p);
  const nlohmann::json j = m.to_json();
  ASSERT_EQ(j["files"].size(), 4u);
  for (const auto& f : j["files"]) {
    const fs::path p = dir / f["path"].get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(f["sha256"], sha256_file(p));
  }
  std::ifstream svg(dir / "z.svg");
  const std::string text((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
  fs::remove_all(dir);
}
