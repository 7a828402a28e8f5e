#pragma once

// Log-domain interior-point method for convex QPs of the form
//
//   minimize    1/2 z'Hz + c'z
//   subject to  Az + b >= 0
//
// Slack and dual are parameterized as s = sqrt(eta) exp(-gamma) and
// lambda = sqrt(eta) exp(gamma), so the iterate is just (gamma, eta).

#include <Eigen/Dense>

#include <stdexcept>
#include <variant>

namespace cgmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a factorization fails or an exponent leaves the safe range.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entries of gamma are clamped to [-kGammaMax, kGammaMax] before exponentiation.
inline constexpr double kGammaMax = 30.0;
inline constexpr int kDefaultMaxIters = 200;

class QpProblem {
 public:
  /// Validates symmetry and semidefiniteness of H and definiteness of A'A + H.
  /// Throws std::invalid_argument when any invariant fails.
  QpProblem(Mat H, Vec c, Mat A, Vec b);

  /// Skips the definiteness checks. Only for callers that validated H and A
  /// once and rebuild the QP with new (c, b), e.g. a parametric MPC problem.
  static QpProblem trusted(Mat H, Vec c, Mat A, Vec b);

  const Mat& H() const { return H_; }
  const Vec& c() const { return c_; }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }
  Eigen::Index num_vars() const { return H_.rows(); }
  Eigen::Index num_constraints() const { return A_.rows(); }

  double objective(const Vec& z) const { return 0.5 * z.dot(H_ * z) + c_.dot(z); }
  Vec slack(const Vec& z) const { return A_ * z + b_; }

 private:
  struct Unchecked {};
  QpProblem(Unchecked, Mat H, Vec c, Mat A, Vec b);

  Mat H_;
  Vec c_;
  Mat A_;
  Vec b_;
};

struct LdipmIterate {
  Vec gamma;
  double eta = 1.0;
};

struct NewtonResult {
  Vec d;
  Vec z;
  double inf_norm_d = 0.0;
};

/// d(gamma, eta) = p + q / sqrt(eta), together with the split z = sqrt(eta) z_a + z_b.
struct EtaLine {
  Vec p;
  Vec q;
  Vec z_a;
  Vec z_b;

  Vec direction(double eta) const { return p + q / std::sqrt(eta); }
  Vec primal(double eta) const { return std::sqrt(eta) * z_a + z_b; }
};

/// eta* when the feasible set {eta > 0 : |d|_inf <= 1} is empty.
struct Unbounded {};
using EtaStar = std::variant<double, Unbounded>;

inline bool is_bounded(const EtaStar& e) { return std::holds_alternative<double>(e); }

struct Duals {
  Vec s;
  Vec lambda;
};

enum class SolveStatus { Converged, IterationLimit };

struct SolveReport {
  Vec z;
  Vec gamma;
  Vec d;
  double eta = 0.0;
  Vec s;
  Vec lambda;
  int iterations = 0;
  double suboptimality_bound = 0.0;
  SolveStatus status = SolveStatus::Converged;
};

Vec clamp_gamma(const Vec& gamma);

/// Factorization of A' diag(exp(2 gamma)) A + H for one gamma. The same
/// factorization serves any (c, b, eta) that share H and A.
class NewtonSystem {
 public:
  NewtonSystem(const Mat& H, const Mat& A, const Vec& gamma);

  EtaLine line(const Vec& c, const Vec& b) const;
  const Vec& exp_gamma() const { return exp_gamma_; }

 private:
  Mat A_;
  Vec exp_gamma_;
  Vec phi_;
  Eigen::LLT<Mat> llt_;
  Vec z_a_;
};

NewtonResult newton_direction(const LdipmIterate& iter, const QpProblem& qp);

EtaLine eta_line_coefficients(const Vec& gamma, const QpProblem& qp);

/// inf{eta > 0 : |p + q / sqrt(eta)|_inf <= 1}, in one pass over the rows.
EtaStar eta_star(const EtaLine& line);
EtaStar eta_star(const Vec& gamma, const QpProblem& qp);

Duals recover_duals(const Vec& gamma, double eta, const Vec& d);

/// Long-step path following: while eta > eta_f or |d|_inf > 1, set
/// eta <- min(eta, max(eta*, eta_f)) and take the damped step gamma += d / alpha.
/// `iterations` counts loop passes, so a warm start that already satisfies
/// the exit test costs zero.
SolveReport longstep(const QpProblem& qp, const Vec& gamma0, double eta0, double eta_f,
                     int max_iters = kDefaultMaxIters);

}  // namespace cgmpc
