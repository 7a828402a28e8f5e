#include "cgmpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cgmpc {

LpResult lp_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                     const Eigen::VectorXd& x0, double feas_tol) {
  using Eigen::Index;
  const Index n = c.size();
  const Index m = G.rows();
  if (G.cols() != n || h.size() != m || x0.size() != n) {
    throw std::invalid_argument("lp_maximize: dimension mismatch");
  }
  Eigen::VectorXd x = x0;
  for (Index i = 0; i < m; ++i) {
    if (G.row(i).dot(x) > h[i] + feas_tol * (1.0 + std::abs(h[i]))) {
      throw std::invalid_argument("lp_maximize: starting point is infeasible");
    }
  }

  const Eigen::VectorXd row_norm = G.rowwise().norm();
  const double cnorm = std::max(1.0, c.norm());
  std::vector<Index> working;
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);

  LpResult out;
  const int max_iters = static_cast<int>(50 * (m + n) + 100);
  for (int iter = 0; iter < max_iters; ++iter) {
    out.iterations = iter;
    const Index k = static_cast<Index>(working.size());
    Eigen::MatrixXd Aw(n, k);
    for (Index j = 0; j < k; ++j) Aw.col(j) = G.row(working[j]).transpose() / row_norm[working[j]];

    Eigen::VectorXd p = c;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    if (k > 0) {
      qr.compute(Aw);
      const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd null = Q.rightCols(n - k);
      p = null * (null.transpose() * c);
    }

    if (p.norm() <= 1e-12 * cnorm) {
      // c lies in the span of the working rows: check multiplier signs.
      Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
      if (k > 0) lambda = qr.solve(c);
      Index drop = -1;
      for (Index j = 0; j < k; ++j) {
        if (lambda[j] < -1e-11 * cnorm && (drop < 0 || working[j] < working[drop])) drop = j;
      }
      if (drop < 0) {
        out.status = LpStatus::Optimal;
        out.x = x;
        out.value = c.dot(x);
        return out;
      }
      in_working[static_cast<std::size_t>(working[drop])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double step = std::numeric_limits<double>::infinity();
    Index block = -1;
    const double pnorm = p.norm();
    for (Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double gp = G.row(i).dot(p);
      if (gp <= 1e-12 * row_norm[i] * pnorm) continue;
      const double t = std::max(0.0, (h[i] - G.row(i).dot(x)) / gp);
      if (t < step) {
        step = t;
        block = i;
      }
    }
    if (block < 0) {
      out.status = LpStatus::Unbounded;
      out.x = x;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    x += step * p;
    working.push_back(block);
    in_working[static_cast<std::size_t>(block)] = 1;
  }
  throw std::runtime_error("lp_maximize: iteration limit reached (cycling?)");
}

}  // namespace cgmpc
