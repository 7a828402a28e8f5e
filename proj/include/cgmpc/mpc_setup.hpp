#pragma once

// Reference-tracking MPC construction: plant discretization, equilibrium
// parameterization, LQR terminal ingredients, the maximal admissible set of
// the closed loop under LQR, and the condensed parametric QP
//
//   minimize    1/2 mu'H mu + mu'(Wx x + Wv v)
//   subject to  M mu + Lx x + Lv v + b >= 0.

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

#include "cgmpc/qp_ldipm.hpp"

namespace cgmpc {

class SetupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x+ = Ax + Bu, y = Cx + Du (constrained), z = Ex + Fu (tracked).
struct PlantModel {
  Mat A, B, C, D, E, F;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index n_u() const { return B.cols(); }
  Eigen::Index n_y() const { return C.rows(); }
  Eigen::Index n_z() const { return E.rows(); }

  /// Throws SetupError on inconsistent dimensions.
  void validate() const;
};

/// {y : Y y <= h}
struct ConstraintPolyhedron {
  Mat Y;
  Vec h;

  /// Requires h > 0 and a bounded set (each coordinate direction checked by LP).
  void validate(Eigen::Index n_y) const;
};

struct EquilibriumMap {
  Mat Gx, Gu, Gz, Gy;

  Eigen::Index n_v() const { return Gx.cols(); }
  Vec x_bar(const Vec& v) const { return Gx * v; }
  Vec u_bar(const Vec& v) const { return Gu * v; }
};

struct TrackingDesign {
  int N = 1;
  Mat Q, R, P, K;
};

struct DareSolution {
  Mat P;
  Mat K;
  int iterations = 0;
};

/// Polyhedron {(x, v) : H w <= h} in the augmented space w = (x, v).
struct TerminalSet {
  Mat H;
  Vec h;
  int k_star = 0;
  bool determined = false;

  bool contains(const Vec& w, double tol = 1e-9) const;
  /// min_i (h_i - H_i w); negative outside the set.
  double margin(const Vec& w) const;
};

struct RowTag {
  enum class Kind { Stage, Terminal };
  Kind kind = Kind::Stage;
  int stage = 0;  // prediction step for Stage rows, -1 for Terminal rows
  int index = 0;  // row of Y, or row of the terminal set
};

struct CondensedQP {
  Mat H;
  Mat Wx, Wv;
  Mat M;
  Mat Lx, Lv;
  Vec b;
  std::vector<RowTag> row_layout;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_constraints() const { return M.rows(); }

  Vec linear_cost(const Vec& x, const Vec& v) const { return Wx * x + Wv * v; }
  Vec offset(const Vec& x, const Vec& v) const { return Lx * x + Lv * v + b; }
  Vec slack(const Vec& mu, const Vec& x, const Vec& v) const { return M * mu + offset(x, v); }
  /// QP at theta = (x, v). H and M were validated when the problem was condensed.
  QpProblem instantiate(const Vec& x, const Vec& v) const;
};

/// Zero-order hold discretization.
std::pair<Mat, Mat> discretize(const Mat& Ac, const Mat& Bc, double T);

/// exp(X) by scaling and squaring with a truncated Taylor series.
Mat matrix_exponential(const Mat& X);

EquilibriumMap equilibrium_basis(const PlantModel& model);

/// Fixed-point Riccati iteration from P = Q.
DareSolution solve_dare(const PlantModel& model, const Mat& Q, const Mat& R);

/// Validates Q, R > 0, solves the DARE and checks closed-loop stability.
TrackingDesign make_design(const PlantModel& model, int N, const Mat& Q, const Mat& R);

double spectral_radius(const Mat& A);

/// Closed-loop matrices of the augmented system w = (x, v) under
/// u = -K(x - Gx v) + Gu v: w+ = Aw w, y = Cw w.
struct AugmentedLoop {
  Mat Aw;
  Mat Cw;
};
AugmentedLoop augmented_loop(const PlantModel& model, const TrackingDesign& design,
                             const EquilibriumMap& eq);

TerminalSet max_admissible_set(const PlantModel& model, const TrackingDesign& design,
                               const EquilibriumMap& eq, const ConstraintPolyhedron& constraints,
                               double epsilon, int k_max);

CondensedQP condense(const PlantModel& model, const TrackingDesign& design,
                     const EquilibriumMap& eq, const ConstraintPolyhedron& constraints,
                     const TerminalSet& terminal);

/// v in the interior of the admissible reference set: Y Gy v <= h - margin.
bool reference_admissible(const Vec& v, const EquilibriumMap& eq,
                          const ConstraintPolyhedron& constraints, double margin = 1e-9);

/// Predicted states xi_0..xi_N under the stacked input sequence mu.
std::vector<Vec> predict_states(const PlantModel& model, const Vec& x, const Vec& mu, int N);

/// Tracking cost of the uncondensed problem at (x, v) for input sequence mu.
double tracking_cost(const PlantModel& model, const TrackingDesign& design,
                     const EquilibriumMap& eq, const Vec& x, const Vec& v, const Vec& mu);

}  // namespace cgmpc
