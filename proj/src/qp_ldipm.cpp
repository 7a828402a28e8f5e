#include "cgmpc/qp_ldipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace cgmpc {

namespace {

void check_dimensions(const Mat& H, const Vec& c, const Mat& A, const Vec& b) {
  if (H.rows() != H.cols()) throw std::invalid_argument("QpProblem: H must be square");
  if (c.size() != H.rows()) throw std::invalid_argument("QpProblem: c has wrong length");
  if (A.cols() != H.rows()) throw std::invalid_argument("QpProblem: A has wrong column count");
  if (b.size() != A.rows()) throw std::invalid_argument("QpProblem: b has wrong length");
  if (!H.allFinite() || !c.allFinite() || !A.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("QpProblem: non-finite data");
  }
}

}  // namespace

QpProblem::QpProblem(Mat H, Vec c, Mat A, Vec b) {
  check_dimensions(H, c, A, b);
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("QpProblem: H is not symmetric");
  }
  if (H.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(H, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::invalid_argument("QpProblem: H is not positive semidefinite");
    }
  }
  Eigen::LLT<Mat> llt(A.transpose() * A + H);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("QpProblem: A'A + H is not positive definite");
  }
  H_ = std::move(H);
  c_ = std::move(c);
  A_ = std::move(A);
  b_ = std::move(b);
}

QpProblem::QpProblem(Unchecked, Mat H, Vec c, Mat A, Vec b)
    : H_(std::move(H)), c_(std::move(c)), A_(std::move(A)), b_(std::move(b)) {}

QpProblem QpProblem::trusted(Mat H, Vec c, Mat A, Vec b) {
  check_dimensions(H, c, A, b);
  return QpProblem(Unchecked{}, std::move(H), std::move(c), std::move(A), std::move(b));
}

Vec clamp_gamma(const Vec& gamma) {
  if (!gamma.allFinite()) throw NumericError("log-domain variable is not finite");
  return gamma.cwiseMax(-kGammaMax).cwiseMin(kGammaMax);
}

NewtonSystem::NewtonSystem(const Mat& H, const Mat& A, const Vec& gamma) : A_(A) {
  if (gamma.size() != A.rows()) throw std::invalid_argument("NewtonSystem: gamma has wrong length");
  const Vec g = clamp_gamma(gamma);
  exp_gamma_ = g.array().exp();
  phi_ = exp_gamma_.array().square();
  Mat K = H;
  K.noalias() += A.transpose() * phi_.asDiagonal() * A;
  llt_.compute(K);
  if (llt_.info() != Eigen::Success) {
    throw NumericError("A' Phi A + H is not positive definite");
  }
  z_a_ = llt_.solve(2.0 * (A.transpose() * exp_gamma_));
}

EtaLine NewtonSystem::line(const Vec& c, const Vec& b) const {
  EtaLine out;
  out.z_a = z_a_;
  out.z_b = llt_.solve(-(c + A_.transpose() * phi_.cwiseProduct(b)));
  out.p = Vec::Ones(A_.rows()) - exp_gamma_.cwiseProduct(A_ * out.z_a);
  out.q = -exp_gamma_.cwiseProduct(A_ * out.z_b + b);
  return out;
}

EtaLine eta_line_coefficients(const Vec& gamma, const QpProblem& qp) {
  return NewtonSystem(qp.H(), qp.A(), gamma).line(qp.c(), qp.b());
}

NewtonResult newton_direction(const LdipmIterate& iter, const QpProblem& qp) {
  if (!(iter.eta > 0.0)) throw std::invalid_argument("newton_direction: eta must be positive");
  const EtaLine line = eta_line_coefficients(iter.gamma, qp);
  NewtonResult out;
  out.z = line.primal(iter.eta);
  // Evaluated from z directly rather than p + q/sqrt(eta).
  const Vec eg = clamp_gamma(iter.gamma).array().exp();
  out.d = Vec::Ones(qp.num_constraints()) - eg.cwiseProduct(qp.slack(out.z)) / std::sqrt(iter.eta);
  out.inf_norm_d = out.d.size() ? out.d.lpNorm<Eigen::Infinity>() : 0.0;
  return out;
}

EtaStar eta_star(const EtaLine& line) {
  // Each row restricts w = 1/sqrt(eta) to a closed interval; the smallest eta
  // is the largest feasible w.
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < line.p.size(); ++i) {
    const double p = line.p[i];
    const double q = line.q[i];
    if (q == 0.0) {
      if (std::abs(p) > 1.0) return Unbounded{};
      continue;
    }
    double a = (-1.0 - p) / q;
    double b = (1.0 - p) / q;
    if (q < 0.0) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    if (hi < lo) return Unbounded{};
  }
  if (hi <= 0.0) return Unbounded{};
  if (std::isinf(hi)) return 0.0;
  return 1.0 / (hi * hi);
}

EtaStar eta_star(const Vec& gamma, const QpProblem& qp) {
  return eta_star(eta_line_coefficients(gamma, qp));
}

Duals recover_duals(const Vec& gamma, double eta, const Vec& d) {
  const double r = std::sqrt(eta);
  const Vec eg = gamma.array().exp();
  const Vec emg = (-gamma.array()).exp();
  Duals out;
  out.lambda = r * (eg + eg.cwiseProduct(d));
  out.s = r * (emg - emg.cwiseProduct(d));
  return out;
}

SolveReport longstep(const QpProblem& qp, const Vec& gamma0, double eta0, double eta_f,
                     int max_iters) {
  if (!(eta0 > 0.0) || !(eta_f > 0.0)) {
    throw std::invalid_argument("longstep: eta0 and eta_f must be positive");
  }
  if (gamma0.size() != qp.num_constraints()) {
    throw std::invalid_argument("longstep: gamma0 has wrong length");
  }
  const auto inf_norm = [](const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; };

  SolveReport report;
  Vec gamma = clamp_gamma(gamma0);
  double eta = eta0;
  int iters = 0;

  // Primal-dual feasible iterate with the smallest eta seen so far, returned
  // when the iteration cap is hit.
  struct Snapshot {
    Vec gamma;
    double eta;
    EtaLine line;
  };
  std::optional<Snapshot> best;

  EtaLine line;
  while (true) {
    line = NewtonSystem(qp.H(), qp.A(), gamma).line(qp.c(), qp.b());
    const double dnorm = inf_norm(line.direction(eta));
    if (dnorm <= 1.0 && (!best || eta < best->eta)) best = Snapshot{gamma, eta, line};
    if (!(eta > eta_f) && dnorm <= 1.0) {
      report.status = SolveStatus::Converged;
      break;
    }
    if (iters >= max_iters) {
      report.status = SolveStatus::IterationLimit;
      if (best) {
        gamma = best->gamma;
        eta = best->eta;
        line = best->line;
      }
      break;
    }
    const EtaStar star = eta_star(line);
    // The reduction stops at eta_f; eta* == 0 means any eta keeps |d| <= 1.
    if (const double* e = std::get_if<double>(&star)) eta = std::min(eta, std::max(*e, eta_f));
    const Vec d = line.direction(eta);
    const double n = inf_norm(d);
    const double alpha = std::max(1.0, n * n);
    gamma = clamp_gamma(gamma + d / alpha);
    ++iters;
  }

  report.gamma = gamma;
  report.eta = eta;
  report.iterations = iters;
  report.z = line.primal(eta);
  report.d = line.direction(eta);
  const Duals duals = recover_duals(gamma, eta, report.d);
  report.s = duals.s;
  report.lambda = duals.lambda;
  report.suboptimality_bound = static_cast<double>(qp.num_constraints()) * eta;
  return report;
}

}  // namespace cgmpc
