#include "cgmpc/mpc_setup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cgmpc/lp.hpp"

namespace cgmpc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw SetupError(what);
}

bool positive_definite(const Mat& S) {
  if (S.rows() != S.cols() || S.rows() == 0) return false;
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Mat> llt(S);
  return llt.info() == Eigen::Success;
}

// Drops rows of {G w <= g} that are implied by the remaining rows.
void prune_redundant(Mat& G, Vec& g, double tol) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    if (G.row(i).norm() > 1e-14) keep.push_back(i);
  }
  std::size_t i = 0;
  while (i < keep.size()) {
    Mat Gr(static_cast<Eigen::Index>(keep.size() - 1), G.cols());
    Vec gr(Gr.rows());
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (j == i) continue;
      Gr.row(r) = G.row(keep[j]);
      gr[r++] = g[keep[j]];
    }
    const Eigen::Index row = keep[i];
    const LpResult res = lp_maximize(G.row(row).transpose(), Gr, gr, Vec::Zero(G.cols()));
    if (res.status == LpStatus::Optimal && res.value <= g[row] + tol * (1.0 + std::abs(g[row]))) {
      keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  Mat Gk(static_cast<Eigen::Index>(keep.size()), G.cols());
  Vec gk(Gk.rows());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    Gk.row(static_cast<Eigen::Index>(j)) = G.row(keep[j]);
    gk[static_cast<Eigen::Index>(j)] = g[keep[j]];
  }
  G = std::move(Gk);
  g = std::move(gk);
}

}  // namespace

void PlantModel::validate() const {
  const auto n = A.rows();
  require(A.cols() == n && n > 0, "model: A must be square and non-empty");
  require(B.rows() == n && B.cols() > 0, "model: B must have n rows");
  require(C.cols() == n && C.rows() > 0, "model: C must have n columns");
  require(D.rows() == C.rows() && D.cols() == B.cols(), "model: D must be n_y x n_u");
  require(E.cols() == n && E.rows() > 0, "model: E must have n columns");
  require(F.rows() == E.rows() && F.cols() == B.cols(), "model: F must be n_z x n_u");
  require(A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite() && E.allFinite() &&
              F.allFinite(),
          "model: non-finite entries");
}

void ConstraintPolyhedron::validate(Eigen::Index n_y) const {
  require(Y.cols() == n_y, "constraints: Y must have n_y columns");
  require(h.size() == Y.rows(), "constraints: h must have one entry per row of Y");
  require((h.array() > 0.0).all(), "constraints: h must be positive so the origin is interior");
  for (Eigen::Index j = 0; j < n_y; ++j) {
    for (double sign : {1.0, -1.0}) {
      Vec dir = Vec::Zero(n_y);
      dir[j] = sign;
      const LpResult res = lp_maximize(dir, Y, h, Vec::Zero(n_y));
      require(res.status == LpStatus::Optimal,
              "constraints: set is unbounded along output " + std::to_string(j));
    }
  }
}

bool TerminalSet::contains(const Vec& w, double tol) const {
  return ((H * w - h).array() <= tol).all();
}

double TerminalSet::margin(const Vec& w) const {
  if (H.rows() == 0) return std::numeric_limits<double>::infinity();
  return (h - H * w).minCoeff();
}

QpProblem CondensedQP::instantiate(const Vec& x, const Vec& v) const {
  return QpProblem::trusted(H, linear_cost(x, v), M, offset(x, v));
}

Mat matrix_exponential(const Mat& X) {
  const double norm = X.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat S = X / std::ldexp(1.0, squarings);
  Mat sum = Mat::Identity(X.rows(), X.cols());
  Mat term = sum;
  for (int k = 1; k < 40; ++k) {
    term = term * S / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-17 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

std::pair<Mat, Mat> discretize(const Mat& Ac, const Mat& Bc, double T) {
  require(T > 0.0, "discretize: sample period must be positive");
  require(Ac.rows() == Ac.cols() && Bc.rows() == Ac.rows(), "discretize: dimension mismatch");
  const auto n = Ac.rows();
  const auto nu = Bc.cols();
  Mat aug = Mat::Zero(n + nu, n + nu);
  aug.topLeftCorner(n, n) = Ac * T;
  aug.topRightCorner(n, nu) = Bc * T;
  const Mat E = matrix_exponential(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, nu)};
}

EquilibriumMap equilibrium_basis(const PlantModel& model) {
  model.validate();
  const auto n = model.n();
  const auto nu = model.n_u();
  const auto nz = model.n_z();
  Mat Z = Mat::Zero(n + nz, n + nu + nz);
  Z.block(0, 0, n, n) = model.A - Mat::Identity(n, n);
  Z.block(0, n, n, nu) = model.B;
  Z.block(n, 0, nz, n) = model.E;
  Z.block(n, n, nz, nu) = model.F;
  Z.block(n, n + nu, nz, nz) = -Mat::Identity(nz, nz);

  Eigen::JacobiSVD<Mat> svd(Z, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double tol = std::max(Z.rows(), Z.cols()) * sv[0] * 1e-12;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > tol) ++rank;
  const Eigen::Index nullity = Z.cols() - rank;
  require(nullity > 0, "equilibrium_basis: no nontrivial equilibria");
  require(nullity == nz, "equilibrium_basis: reference dimension " + std::to_string(nullity) +
                             " differs from tracking output dimension " + std::to_string(nz));
  Mat G = svd.matrixV().rightCols(nullity);

  const Mat Gz = G.bottomRows(nz);
  Eigen::JacobiSVD<Mat> gz_svd(Gz);
  require(gz_svd.singularValues().minCoeff() > 1e-10,
          "equilibrium_basis: Gz is singular; the reference does not determine a unique equilibrium");
  G = G * Gz.inverse();

  EquilibriumMap eq;
  eq.Gx = G.topRows(n);
  eq.Gu = G.middleRows(n, nu);
  eq.Gz = Mat::Identity(nz, nz);
  eq.Gy = model.C * eq.Gx + model.D * eq.Gu;
  return eq;
}

DareSolution solve_dare(const PlantModel& model, const Mat& Q, const Mat& R) {
  const Mat& A = model.A;
  const Mat& B = model.B;
  require(Q.rows() == A.rows() && Q.cols() == A.rows(), "dare: Q must be n x n");
  require(R.rows() == B.cols() && R.cols() == B.cols(), "dare: R must be n_u x n_u");
  DareSolution out;
  Mat P = Q;
  for (int i = 1; i <= 100000; ++i) {
    const Mat BtP = B.transpose() * P;
    const Mat gain = (R + BtP * B).ldlt().solve(BtP * A);
    Mat next = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
    next = 0.5 * (next + next.transpose());
    const double change = (next - P).cwiseAbs().maxCoeff();
    const double scale = P.cwiseAbs().maxCoeff();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (change <= 1e-12 * scale) {
      out.P = P;
      const Mat BtPc = B.transpose() * P;
      out.K = (R + BtPc * B).ldlt().solve(BtPc * A);
      out.iterations = i;
      return out;
    }
  }
  throw SetupError("dare: Riccati iteration did not converge; (A, B) may not be stabilizable");
}

double spectral_radius(const Mat& A) {
  return Eigen::EigenSolver<Mat>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

TrackingDesign make_design(const PlantModel& model, int N, const Mat& Q, const Mat& R) {
  require(N >= 1, "design: horizon N must be at least 1");
  require(positive_definite(Q), "design: Q must be symmetric positive definite");
  require(positive_definite(R), "design: R must be symmetric positive definite");
  const DareSolution dare = solve_dare(model, Q, R);
  TrackingDesign d;
  d.N = N;
  d.Q = Q;
  d.R = R;
  d.P = dare.P;
  d.K = dare.K;
  require(spectral_radius(model.A - model.B * d.K) < 1.0 - 1e-9,
          "design: LQR closed loop is not Schur stable");
  return d;
}

AugmentedLoop augmented_loop(const PlantModel& model, const TrackingDesign& design,
                             const EquilibriumMap& eq) {
  const auto n = model.n();
  const auto nv = eq.n_v();
  const Mat feed = design.K * eq.Gx + eq.Gu;
  AugmentedLoop loop;
  loop.Aw = Mat::Zero(n + nv, n + nv);
  loop.Aw.topLeftCorner(n, n) = model.A - model.B * design.K;
  loop.Aw.topRightCorner(n, nv) = model.B * feed;
  loop.Aw.bottomRightCorner(nv, nv) = Mat::Identity(nv, nv);
  loop.Cw.resize(model.n_y(), n + nv);
  loop.Cw.leftCols(n) = model.C - model.D * design.K;
  loop.Cw.rightCols(nv) = model.D * feed;
  return loop;
}

TerminalSet max_admissible_set(const PlantModel& model, const TrackingDesign& design,
                               const EquilibriumMap& eq, const ConstraintPolyhedron& constraints,
                               double epsilon, int k_max) {
  require(epsilon > 0.0 && epsilon < 1.0, "terminal set: epsilon must lie in (0, 1)");
  require(k_max >= 1, "terminal set: k_max must be positive");
  const auto n = model.n();
  const auto nv = eq.n_v();
  const auto q = constraints.Y.rows();
  const AugmentedLoop loop = augmented_loop(model, design, eq);
  constexpr double kTol = 1e-9;

  // Steady-state rows on v, tightened so the set is finitely determined.
  Mat H(q, n + nv);
  H.leftCols(n).setZero();
  H.rightCols(nv) = constraints.Y * eq.Gy;
  Vec h = (1.0 - epsilon) * constraints.h;

  Mat out_map = constraints.Y * loop.Cw;  // Y Cw Aw^k
  auto append = [&](const Mat& rows) {
    Mat H2(H.rows() + rows.rows(), H.cols());
    H2 << H, rows;
    Vec h2(h.size() + q);
    h2 << h, constraints.h;
    H = std::move(H2);
    h = std::move(h2);
  };
  append(out_map);

  TerminalSet set;
  for (int k = 0; k < k_max; ++k) {
    out_map = out_map * loop.Aw;
    bool redundant = true;
    for (Eigen::Index i = 0; i < q && redundant; ++i) {
      const LpResult res = lp_maximize(out_map.row(i).transpose(), H, h, Vec::Zero(n + nv));
      redundant = res.status == LpStatus::Optimal &&
                  res.value <= constraints.h[i] + kTol * (1.0 + std::abs(constraints.h[i]));
    }
    if (redundant) {
      set.k_star = k;
      set.determined = true;
      break;
    }
    append(out_map);
    set.k_star = k + 1;
  }
  prune_redundant(H, h, kTol);
  set.H = std::move(H);
  set.h = std::move(h);
  return set;
}

CondensedQP condense(const PlantModel& model, const TrackingDesign& design,
                     const EquilibriumMap& eq, const ConstraintPolyhedron& constraints,
                     const TerminalSet& terminal) {
  const auto n = model.n();
  const auto nu = model.n_u();
  const auto nv = eq.n_v();
  const int N = design.N;
  require(terminal.H.cols() == n + nv, "condense: terminal set has wrong dimension");
  require(constraints.Y.cols() == model.n_y(), "condense: constraint matrix has wrong width");

  // xi = Sx x + Su mu, xi stacked over steps 0..N.
  Mat Sx = Mat::Zero(n * (N + 1), n);
  Mat Su = Mat::Zero(n * (N + 1), nu * N);
  Sx.topRows(n) = Mat::Identity(n, n);
  for (int i = 1; i <= N; ++i) {
    Sx.middleRows(n * i, n) = model.A * Sx.middleRows(n * (i - 1), n);
    Su.middleRows(n * i, n) = model.A * Su.middleRows(n * (i - 1), n);
    Su.block(n * i, nu * (i - 1), n, nu) = model.B;
  }

  Mat Qbar = Mat::Zero(n * (N + 1), n * (N + 1));
  for (int i = 0; i < N; ++i) Qbar.block(n * i, n * i, n, n) = design.Q;
  Qbar.block(n * N, n * N, n, n) = design.P;
  Mat Rbar = Mat::Zero(nu * N, nu * N);
  Mat Xv(n * (N + 1), nv);
  Mat Uv(nu * N, nv);
  for (int i = 0; i < N; ++i) {
    Rbar.block(nu * i, nu * i, nu, nu) = design.R;
    Uv.middleRows(nu * i, nu) = eq.Gu;
  }
  for (int i = 0; i <= N; ++i) Xv.middleRows(n * i, n) = eq.Gx;

  CondensedQP qp;
  const Mat SuQ = Su.transpose() * Qbar;
  qp.H = 2.0 * (SuQ * Su + Rbar);
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.Wx = 2.0 * SuQ * Sx;
  qp.Wv = -2.0 * (SuQ * Xv + Rbar * Uv);

  const auto q = constraints.Y.rows();
  const auto mt = terminal.H.rows();
  const auto m = q * N + mt;
  qp.M = Mat::Zero(m, nu * N);
  qp.Lx = Mat::Zero(m, n);
  qp.Lv = Mat::Zero(m, nv);
  qp.b = Vec::Zero(m);
  qp.row_layout.reserve(static_cast<std::size_t>(m));

  const Mat YC = constraints.Y * model.C;
  const Mat YD = constraints.Y * model.D;
  for (int i = 0; i < N; ++i) {
    const auto r0 = q * i;
    qp.M.middleRows(r0, q) = -YC * Su.middleRows(n * i, n);
    qp.M.block(r0, nu * i, q, nu) -= YD;
    qp.Lx.middleRows(r0, q) = -YC * Sx.middleRows(n * i, n);
    qp.b.segment(r0, q) = constraints.h;
    for (Eigen::Index j = 0; j < q; ++j) {
      qp.row_layout.push_back({RowTag::Kind::Stage, i, static_cast<int>(j)});
    }
  }
  const auto r0 = q * N;
  const Mat HTx = terminal.H.leftCols(n);
  qp.M.middleRows(r0, mt) = -HTx * Su.middleRows(n * N, n);
  qp.Lx.middleRows(r0, mt) = -HTx * Sx.middleRows(n * N, n);
  qp.Lv.middleRows(r0, mt) = -terminal.H.rightCols(nv);
  qp.b.segment(r0, mt) = terminal.h;
  for (Eigen::Index j = 0; j < mt; ++j) {
    qp.row_layout.push_back({RowTag::Kind::Terminal, -1, static_cast<int>(j)});
  }

  // Drop rows on the current state alone.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.M.row(i).cwiseAbs().maxCoeff() != 0.0 || qp.Lv.row(i).cwiseAbs().maxCoeff() != 0.0) {
      keep.push_back(i);
    }
  }
  if (static_cast<Eigen::Index>(keep.size()) < m) {
    qp.M = qp.M(keep, Eigen::all).eval();
    qp.Lx = qp.Lx(keep, Eigen::all).eval();
    qp.Lv = qp.Lv(keep, Eigen::all).eval();
    qp.b = qp.b(keep).eval();
    std::vector<RowTag> layout;
    for (Eigen::Index i : keep) layout.push_back(qp.row_layout[static_cast<std::size_t>(i)]);
    qp.row_layout = std::move(layout);
  }

  // Validates H > 0 and M'M + H > 0 once for every later instantiation.
  (void)QpProblem(qp.H, Vec::Zero(qp.H.rows()), qp.M, qp.b);
  require(positive_definite(qp.H), "condense: H is not positive definite");
  return qp;
}

bool reference_admissible(const Vec& v, const EquilibriumMap& eq,
                          const ConstraintPolyhedron& constraints, double margin) {
  if (v.size() != eq.n_v()) return false;
  return ((constraints.Y * (eq.Gy * v) - constraints.h).array() <= -margin).all();
}

std::vector<Vec> predict_states(const PlantModel& model, const Vec& x, const Vec& mu, int N) {
  const auto nu = model.n_u();
  require(mu.size() == nu * N, "predict_states: input sequence has wrong length");
  std::vector<Vec> xi;
  xi.reserve(static_cast<std::size_t>(N + 1));
  xi.push_back(x);
  for (int i = 0; i < N; ++i) xi.push_back(model.A * xi.back() + model.B * mu.segment(nu * i, nu));
  return xi;
}

double tracking_cost(const PlantModel& model, const TrackingDesign& design,
                     const EquilibriumMap& eq, const Vec& x, const Vec& v, const Vec& mu) {
  const auto nu = model.n_u();
  const std::vector<Vec> xi = predict_states(model, x, mu, design.N);
  const Vec xb = eq.x_bar(v);
  const Vec ub = eq.u_bar(v);
  double J = 0.0;
  for (int i = 0; i < design.N; ++i) {
    const Vec dx = xi[static_cast<std::size_t>(i)] - xb;
    const Vec du = mu.segment(nu * i, nu) - ub;
    J += dx.dot(design.Q * dx) + du.dot(design.R * du);
  }
  const Vec dN = xi.back() - xb;
  return J + dN.dot(design.P * dN);
}

}  // namespace cgmpc
