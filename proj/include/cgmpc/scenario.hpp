#pragma once

// JSON scenario files.
//
// Matrices are row-major nested arrays. A plant is either given by matrices
// ("type": "matrices", optionally "continuous": true) or by the physical
// parameters of the linear bicycle model ("type": "bicycle").

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cgmpc/simulate.hpp"

namespace cgmpc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BicycleParameters {
  double longitudinal_velocity = 10.0;  // U_x [m/s]
  double mass = 1724.0;                 // [kg]
  double yaw_inertia = 1300.0;          // I_zz [kg m^2]
  double front_cornering_stiffness = 160000.0;  // [N/rad]
  double rear_cornering_stiffness = 180000.0;   // [N/rad]
  double front_axle_distance = 1.35;    // a [m]
  double rear_axle_distance = 1.15;     // b [m]
};

/// Continuous-time bicycle model with state (sideslip, yaw rate, lateral
/// position) and steering input. All states and the input are constrained
/// outputs; lateral position is tracked.
PlantModel bicycle_model(const BicycleParameters& p);

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig parse_config_file(const std::filesystem::path& path);

}  // namespace cgmpc
