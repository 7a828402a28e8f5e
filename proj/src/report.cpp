#include "cgmpc/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cgmpc {

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("steps.csv: malformed number '" + s + "'");
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> steps_csv_header(const StepDims& dims) {
  std::vector<std::string> h{"k", "t"};
  auto block = [&](const char* name, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) h.push_back(std::string(name) + "[" + std::to_string(i) + "]");
  };
  block("x", dims.n);
  block("u", dims.n_u);
  block("z", dims.n_z);
  block("v", dims.n_v);
  for (const char* c : {"kappa", "eta_start", "eta_end", "eta_f", "iterations", "fallback",
                        "constraint_margin", "wall_time_us"}) {
    h.emplace_back(c);
  }
  return h;
}

void write_steps_csv(std::ostream& out, const std::vector<StepLog>& steps, const StepDims& dims) {
  const auto header = steps_csv_header(dims);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const StepLog& s : steps) {
    out << s.k << ',' << fmt17(s.t);
    for (const Vec* v : {&s.x, &s.u, &s.z, &s.v}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) out << ',' << fmt17((*v)[i]);
    }
    out << ',' << fmt17(s.kappa) << ',' << fmt17(s.eta_start) << ',' << fmt17(s.eta_end) << ','
        << fmt17(s.eta_f) << ',' << s.iterations << ',' << (s.fallback ? 1 : 0) << ','
        << fmt17(s.constraint_margin) << ',' << fmt17(s.wall_time_us) << '\n';
  }
}

void write_steps_csv(const std::filesystem::path& path, const std::vector<StepLog>& steps,
                     const StepDims& dims) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_steps_csv(out, steps, dims);
}

std::vector<StepLog> read_steps_csv(std::istream& in, const StepDims& dims) {
  const auto header = steps_csv_header(dims);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("steps.csv: empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= header.size() || cell != header[i]) throw std::runtime_error("steps.csv: unexpected header");
      ++i;
    }
    if (i != header.size()) throw std::runtime_error("steps.csv: unexpected header");
  }
  std::vector<StepLog> steps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw std::runtime_error("steps.csv: wrong column count");
    std::size_t c = 0;
    StepLog s;
    s.k = std::stoi(cells[c++]);
    s.t = parse_double(cells[c++]);
    auto read_block = [&](Vec& v, Eigen::Index n) {
      v.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = parse_double(cells[c++]);
    };
    read_block(s.x, dims.n);
    read_block(s.u, dims.n_u);
    read_block(s.z, dims.n_z);
    read_block(s.v, dims.n_v);
    s.kappa = parse_double(cells[c++]);
    s.eta_start = parse_double(cells[c++]);
    s.eta_end = parse_double(cells[c++]);
    s.eta_f = parse_double(cells[c++]);
    s.iterations = std::stoi(cells[c++]);
    s.fallback = cells[c++] == "1";
    s.constraint_margin = parse_double(cells[c++]);
    s.wall_time_us = parse_double(cells[c++]);
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<StepLog> read_steps_csv(const std::filesystem::path& path, const StepDims& dims) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_steps_csv(in, dims);
}

nlohmann::json summary_json(const SimulationLog& log, const std::optional<ModeBenchmark>& bench,
                            int trials) {
  nlohmann::json j;
  j["mode"] = to_string(log.mode);
  j["steps"] = log.steps.size();
  j["max_iterations"] = log.summary.max_iterations;
  j["mean_iterations"] = log.summary.mean_iterations;
  j["settle_step"] = log.summary.settle_step >= 0 ? nlohmann::json(log.summary.settle_step)
                                                  : nlohmann::json(nullptr);
  j["worst_wall_time_us"] = log.summary.worst_wall_time_us;
  if (bench) {
    j["trials"] = trials;
    j["worst_time_mean_us"] = bench->worst_time_mean_us;
    j["worst_time_std_us"] = bench->worst_time_std_us;
  }
  return j;
}

std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series) {
  constexpr double W = 720, H = 320, L = 70, R = 150, T = 36, B = 44;
  double tmin = 0, tmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (first) {
        tmin = tmax = s.t[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (tmax <= tmin) tmax = tmin + 1;
  if (ymax <= ymin) {
    ymin -= 1;
    ymax += 1;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double t) { return L + (t - tmin) / (tmax - tmin) * (W - L - R); };
  auto py = [&](double y) { return T + (ymax - y) / (ymax - ymin) * (H - T - B); };

  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    const double tv = tmin + (tmax - tmin) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
      << "</text>\n";
    o << "<text x=\"" << px(tv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << tv
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">t [s]</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      o << px(s.t[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 34 << "\" y2=\""
      << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    o << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir,
                                               const SimulationLog& log,
                                               const Controller& ctl) {
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::vector<double> t;
  for (const StepLog& s : log.steps) t.push_back(s.t);
  auto column = [&](auto get) {
    std::vector<double> y;
    for (const StepLog& s : log.steps) y.push_back(get(s));
    return y;
  };

  std::vector<Series> zs;
  for (Eigen::Index i = 0; i < ctl.model.n_z(); ++i) {
    zs.push_back({"z[" + std::to_string(i) + "]", t, column([i](const StepLog& s) { return s.z[i]; }),
                  palette[i % 5]});
    zs.push_back({"r[" + std::to_string(i) + "]", t, column([i](const StepLog& s) { return s.r[i]; }),
                  "#7f7f7f", true});
    zs.push_back({"v[" + std::to_string(i) + "]", t, column([i](const StepLog& s) { return s.v[i]; }),
                  "#ff7f0e", true});
  }

  // Input bounds from rows of Y that act on a single input channel.
  std::vector<Series> us;
  const Mat YD = ctl.constraints.Y * ctl.model.D;
  const Mat YC = ctl.constraints.Y * ctl.model.C;
  for (Eigen::Index i = 0; i < ctl.model.n_u(); ++i) {
    us.push_back({"u[" + std::to_string(i) + "]", t, column([i](const StepLog& s) { return s.u[i]; }),
                  palette[i % 5]});
    for (Eigen::Index r = 0; r < YD.rows(); ++r) {
      if (YC.row(r).norm() != 0.0 || YD(r, i) == 0.0 ||
          YD.row(r).cwiseAbs().sum() != std::abs(YD(r, i))) {
        continue;
      }
      const double bound = ctl.constraints.h[r] / YD(r, i);
      us.push_back({"bound", t, std::vector<double>(t.size(), bound), "#d62728", true});
    }
  }

  std::vector<Series> its{{"iterations", t,
                           column([](const StepLog& s) { return static_cast<double>(s.iterations); }),
                           "#1f77b4"}};

  const std::string mode = to_string(log.mode);
  std::vector<std::filesystem::path> out;
  auto emit = [&](const std::string& name, const std::string& svg) {
    const auto p = dir / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << svg;
    out.push_back(p);
  };
  emit("z.svg", svg_line_chart("Tracking output (" + mode + ")", "z", zs));
  emit("u.svg", svg_line_chart("Input (" + mode + ")", "u", us));
  emit("iterations.svg", svg_line_chart("Solver iterations per step (" + mode + ")", "iterations", its));
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void RunManifest::add(const std::filesystem::path& file) {
  files.push_back({std::filesystem::relative(file, output_dir).generic_string(), sha256_file(file)});
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["config"] = config_path;
  j["output_dir"] = output_dir;
  j["modes"] = modes;
  j["trials"] = trials;
  j["seed"] = seed;
  j["phase1_check"] = phase1_check;
  j["files"] = nlohmann::json::array();
  for (const Entry& e : files) j["files"].push_back({{"path", e.path}, {"sha256", e.sha256}});
  return j;
}

}  // namespace cgmpc
