#include "cgmpc/scenario.hpp"

#include <fstream>
#include <sstream>

namespace cgmpc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int read_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? fallback : read_number(*it, path + "." + key);
}

int int_or(const json& j, const std::string& key, int fallback, const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? fallback : read_int(*it, path + "." + key);
}

Vec read_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = read_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Mat read_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) fail(rp, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          read_number(j[r][c], rp + "[" + std::to_string(c) + "]");
    }
  }
  return M;
}

bool positive_definite(const Mat& S) {
  if (S.rows() != S.cols()) return false;
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff())) {
    return false;
  }
  return Eigen::LLT<Mat>(S).info() == Eigen::Success;
}

}  // namespace

PlantModel bicycle_model(const BicycleParameters& p) {
  const double Ux = p.longitudinal_velocity;
  const double m = p.mass;
  const double Izz = p.yaw_inertia;
  const double Cf = p.front_cornering_stiffness;
  const double Cr = p.rear_cornering_stiffness;
  const double a = p.front_axle_distance;
  const double b = p.rear_axle_distance;
  PlantModel model;
  model.A.resize(3, 3);
  model.A << -(Cf + Cr) / (m * Ux), -(a * Cf - b * Cr) / (m * Ux * Ux) - 1.0, 0.0,
      -(a * Cf - b * Cr) / Izz, -(a * a * Cf + b * b * Cr) / (Izz * Ux), 0.0,
      Ux, 0.0, 0.0;
  model.B.resize(3, 1);
  model.B << Cf / (m * Ux), a * Cf / Izz, 0.0;
  model.C = Mat::Zero(4, 3);
  model.C.topRows(3) = Mat::Identity(3, 3);
  model.D = Mat::Zero(4, 1);
  model.D(3, 0) = 1.0;
  model.E = Mat::Zero(1, 3);
  model.E(0, 2) = 1.0;
  model.F = Mat::Zero(1, 1);
  return model;
}

ScenarioConfig parse_config(const json& j) {
  if (!j.is_object()) fail("config", "expected a JSON object");
  ScenarioConfig cfg;
  if (auto it = j.find("name"); it != j.end() && it->is_string()) cfg.name = it->get<std::string>();

  const json& plant = field(j, "plant", "config");
  const std::string type = plant.value("type", "matrices");
  if (type == "bicycle") {
    BicycleParameters p;
    p.longitudinal_velocity = number_or(plant, "longitudinal_velocity", p.longitudinal_velocity, "plant");
    p.mass = number_or(plant, "mass", p.mass, "plant");
    p.yaw_inertia = number_or(plant, "yaw_inertia", p.yaw_inertia, "plant");
    p.front_cornering_stiffness =
        number_or(plant, "front_cornering_stiffness", p.front_cornering_stiffness, "plant");
    p.rear_cornering_stiffness =
        number_or(plant, "rear_cornering_stiffness", p.rear_cornering_stiffness, "plant");
    p.front_axle_distance = number_or(plant, "front_axle_distance", p.front_axle_distance, "plant");
    p.rear_axle_distance = number_or(plant, "rear_axle_distance", p.rear_axle_distance, "plant");
    if (!(p.longitudinal_velocity > 0 && p.mass > 0 && p.yaw_inertia > 0)) {
      fail("plant", "velocity, mass and yaw inertia must be positive");
    }
    cfg.model = bicycle_model(p);
    cfg.continuous = true;
  } else if (type == "matrices") {
    cfg.model.A = read_matrix(field(plant, "A", "plant"), "plant.A");
    cfg.model.B = read_matrix(field(plant, "B", "plant"), "plant.B");
    cfg.model.C = read_matrix(field(plant, "C", "plant"), "plant.C");
    cfg.model.E = read_matrix(field(plant, "E", "plant"), "plant.E");
    const auto nu = cfg.model.B.cols();
    cfg.model.D = plant.contains("D") ? read_matrix(plant["D"], "plant.D")
                                      : Mat::Zero(cfg.model.C.rows(), nu);
    cfg.model.F = plant.contains("F") ? read_matrix(plant["F"], "plant.F")
                                      : Mat::Zero(cfg.model.E.rows(), nu);
    if (auto it = plant.find("continuous"); it != plant.end()) {
      if (!it->is_boolean()) fail("plant.continuous", "expected a boolean");
      cfg.continuous = it->get<bool>();
    }
  } else {
    fail("plant.type", "unknown plant type '" + type + "'");
  }
  try {
    cfg.model.validate();
  } catch (const SetupError& e) {
    fail("plant", e.what());
  }

  cfg.T = read_number(field(j, "sample_period", "config"), "sample_period");
  if (!(cfg.T > 0.0)) fail("sample_period", "must be positive");
  cfg.N = read_int(field(j, "horizon", "config"), "horizon");
  if (cfg.N < 1) fail("horizon", "must be at least 1");
  cfg.Q = read_matrix(field(j, "Q", "config"), "Q");
  cfg.R = read_matrix(field(j, "R", "config"), "R");
  if (cfg.Q.rows() != cfg.model.n() || cfg.Q.cols() != cfg.model.n()) fail("Q", "must be n x n");
  if (cfg.R.rows() != cfg.model.n_u() || cfg.R.cols() != cfg.model.n_u()) fail("R", "must be n_u x n_u");
  if (!positive_definite(cfg.Q)) fail("Q", "state weight must be symmetric positive definite");
  if (!positive_definite(cfg.R)) fail("R", "input weight must be symmetric positive definite");

  const json& cons = field(j, "constraints", "config");
  if (cons.contains("Y")) {
    cfg.constraints.Y = read_matrix(cons["Y"], "constraints.Y");
    cfg.constraints.h = read_vector(field(cons, "h", "constraints"), "constraints.h");
  } else {
    const Vec lo = read_vector(field(cons, "lower", "constraints"), "constraints.lower");
    const Vec hi = read_vector(field(cons, "upper", "constraints"), "constraints.upper");
    if (lo.size() != cfg.model.n_y() || hi.size() != cfg.model.n_y()) {
      fail("constraints", "box bounds must have one entry per constrained output");
    }
    const auto ny = cfg.model.n_y();
    cfg.constraints.Y.resize(2 * ny, ny);
    cfg.constraints.Y << Mat::Identity(ny, ny), -Mat::Identity(ny, ny);
    cfg.constraints.h.resize(2 * ny);
    cfg.constraints.h << hi, -lo;
  }
  try {
    cfg.constraints.validate(cfg.model.n_y());
  } catch (const SetupError& e) {
    fail("constraints", e.what());
  }

  if (auto it = j.find("terminal"); it != j.end()) {
    cfg.terminal_epsilon = number_or(*it, "epsilon", cfg.terminal_epsilon, "terminal");
    cfg.terminal_k_max = int_or(*it, "k_max", cfg.terminal_k_max, "terminal");
  }
  if (!(cfg.terminal_epsilon > 0.0 && cfg.terminal_epsilon < 1.0)) {
    fail("terminal.epsilon", "must lie in (0, 1)");
  }

  if (auto it = j.find("governor"); it != j.end()) {
    const json& g = *it;
    GovernorConfig& gc = cfg.governor;
    gc.c = number_or(g, "c", gc.c, "governor");
    gc.eta_min = number_or(g, "eta_min", gc.eta_min, "governor");
    gc.eta_max = number_or(g, "eta_max", gc.eta_max, "governor");
    gc.eta_bar = number_or(g, "eta_bar", gc.eta_bar, "governor");
    if (g.contains("sample_etas")) {
      const Vec s = read_vector(g["sample_etas"], "governor.sample_etas");
      if (s.size() != 2) fail("governor.sample_etas", "expected two values");
      gc.sample_etas = {s[0], s[1]};
    }
    if (g.contains("sample_kappas")) {
      const Vec s = read_vector(g["sample_kappas"], "governor.sample_kappas");
      if (s.size() != 2) fail("governor.sample_kappas", "expected two values");
      gc.sample_kappas = {s[0], s[1]};
    }
    if (g.contains("rng_seed")) {
      if (!g["rng_seed"].is_number_unsigned()) fail("governor.rng_seed", "expected a nonnegative integer");
      gc.rng_seed = g["rng_seed"].get<std::uint64_t>();
    }
  }
  try {
    cfg.governor.validate();
  } catch (const std::invalid_argument& e) {
    fail("governor", e.what());
  }

  if (auto it = j.find("eta_f"); it != j.end()) {
    cfg.eta_f.sigma = number_or(*it, "sigma", cfg.eta_f.sigma, "eta_f");
    cfg.eta_f.floor = number_or(*it, "floor", cfg.eta_f.floor, "eta_f");
    cfg.eta_f.cap = number_or(*it, "cap", cfg.eta_f.cap, "eta_f");
  }
  if (!(cfg.eta_f.sigma > 0.0 && cfg.eta_f.sigma < 1.0)) fail("eta_f.sigma", "must lie in (0, 1)");
  if (!(cfg.eta_f.floor > 0.0 && cfg.eta_f.floor < cfg.eta_f.cap)) {
    fail("eta_f", "need 0 < floor < cap");
  }
  if (auto it = j.find("solver"); it != j.end()) {
    cfg.max_iters = int_or(*it, "max_iters", cfg.max_iters, "solver");
    cfg.eps_s = number_or(*it, "eps_s", cfg.eps_s, "solver");
  }
  if (cfg.max_iters < 1) fail("solver.max_iters", "must be at least 1");
  if (!(cfg.eps_s > 0.0)) fail("solver.eps_s", "must be positive");

  cfg.steps = read_int(field(j, "steps", "config"), "steps");
  if (cfg.steps < 1) fail("steps", "must be at least 1");
  cfg.settle_tol = number_or(j, "settle_tol", cfg.settle_tol, "config");
  if (auto it = j.find("mode"); it != j.end()) {
    try {
      cfg.mode = parse_mode(it->get<std::string>());
    } catch (const std::exception& e) {
      fail("mode", e.what());
    }
  }

  // References are checked against the equilibrium map of the sampled plant.
  PlantModel discrete = cfg.model;
  if (cfg.continuous) std::tie(discrete.A, discrete.B) = discretize(cfg.model.A, cfg.model.B, cfg.T);
  EquilibriumMap eq;
  try {
    eq = equilibrium_basis(discrete);
  } catch (const SetupError& e) {
    fail("plant", e.what());
  }

  const json& ref = field(j, "reference", "config");
  cfg.v0 = read_vector(field(ref, "v0", "reference"), "reference.v0");
  if (cfg.v0.size() != eq.n_v()) fail("reference.v0", "expected " + std::to_string(eq.n_v()) + " entries");
  if (!reference_admissible(cfg.v0, eq, cfg.constraints)) {
    fail("reference.v0", "reference must lie strictly inside the admissible reference set");
  }
  if (auto it = ref.find("schedule"); it != ref.end()) {
    if (!it->is_array()) fail("reference.schedule", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = "reference.schedule[" + std::to_string(i) + "]";
      ReferenceChange c;
      c.time = read_number(field((*it)[i], "time", p), p + ".time");
      c.r = read_vector(field((*it)[i], "r", p), p + ".r");
      if (c.r.size() != eq.n_v()) fail(p + ".r", "expected " + std::to_string(eq.n_v()) + " entries");
      if (!reference_admissible(c.r, eq, cfg.constraints)) {
        fail(p + ".r", "reference must lie strictly inside the admissible reference set");
      }
      if (!cfg.schedule.empty() && c.time < cfg.schedule.back().time) {
        fail(p + ".time", "schedule must be sorted by time");
      }
      cfg.schedule.push_back(std::move(c));
    }
  }
  if (auto it = j.find("x0"); it != j.end()) {
    cfg.x0 = read_vector(*it, "x0");
    if (cfg.x0->size() != cfg.model.n()) fail("x0", "expected " + std::to_string(cfg.model.n()) + " entries");
  }
  if (auto it = j.find("phase1_check"); it != j.end() && it->is_boolean()) cfg.phase1_check = it->get<bool>();
  return cfg;
}

ScenarioConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace cgmpc
