#pragma once

// Output artifacts of a run: steps.csv, summary.json, SVG plots and the
// manifest listing every emitted file with its SHA-256.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgmpc/simulate.hpp"

namespace cgmpc {

struct StepDims {
  Eigen::Index n = 0, n_u = 0, n_z = 0, n_v = 0;
};

std::vector<std::string> steps_csv_header(const StepDims& dims);

/// One header line, then one line per step; doubles with 17 significant digits.
void write_steps_csv(std::ostream& out, const std::vector<StepLog>& steps, const StepDims& dims);
void write_steps_csv(const std::filesystem::path& path, const std::vector<StepLog>& steps,
                     const StepDims& dims);

/// Parses the columns written by write_steps_csv (diagnostic fields stay empty).
std::vector<StepLog> read_steps_csv(std::istream& in, const StepDims& dims);
std::vector<StepLog> read_steps_csv(const std::filesystem::path& path, const StepDims& dims);

nlohmann::json summary_json(const SimulationLog& log,
                            const std::optional<ModeBenchmark>& bench = std::nullopt,
                            int trials = 0);

struct Series {
  std::string label;
  std::vector<double> t;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

/// Standalone SVG line chart.
std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series);

/// Writes z.svg, u.svg and iterations.svg for one run into dir; returns the paths.
std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir,
                                               const SimulationLog& log,
                                               const Controller& ctl);

std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> modes;
  int trials = 0;
  std::uint64_t seed = 0;
  bool phase1_check = false;
  struct Entry {
    std::string path;  // relative to output_dir
    std::string sha256;
  };
  std::vector<Entry> files;

  void add(const std::filesystem::path& file);
  nlohmann::json to_json() const;
};

}  // namespace cgmpc
