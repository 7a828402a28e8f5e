#include <gtest/gtest.h>

#include <random>

#include "cgmpc/lp.hpp"
#include "oracles.hpp"

using cgmpc::LpStatus;
using cgmpc::lp_maximize;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

Mat unit_box_rows(int n) {
  Mat G(2 * n, n);
  G << Mat::Identity(n, n), -Mat::Identity(n, n);
  return G;
}

}  // namespace

TEST(Lp, BoxCorner) {
  const Mat G = unit_box_rows(2);
  const auto r = lp_maximize(Vec::Ones(2), G, Vec::Ones(4), Vec::Zero(2));
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.0, 1e-12);
}

TEST(Lp, HalfPlaneIsUnbounded) {
  Mat G(1, 2);
  G << 1.0, 0.0;
  Vec c(2);
  c << 0.0, 1.0;
  EXPECT_EQ(lp_maximize(c, G, Vec::Ones(1), Vec::Zero(2)).status, LpStatus::Unbounded);
}

TEST(Lp, InfeasibleStartThrows) {
  EXPECT_THROW(lp_maximize(Vec::Ones(2), unit_box_rows(2), Vec::Ones(4), Vec::Constant(2, 2.0)),
               std::invalid_argument);
}

TEST(Lp, DegenerateVertexTerminates) {
  // Three rows through (1, 1).
  Mat G(5, 2);
  G << 1, 0, 0, 1, 1, 1, -1, 0, 0, -1;
  Vec h(5);
  h << 1, 1, 2, 0, 0;
  const auto r = lp_maximize(Vec::Ones(2), G, h, Vec::Zero(2));
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
}

TEST(Lp, MatchesVertexEnumerationInTwoDimensions) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 3 + trial % 10;
    Mat G(m + 4, 2);
    Vec h(m + 4);
    for (int i = 0; i < m; ++i) {
      G(i, 0) = g(rng);
      G(i, 1) = g(rng);
      h[i] = u(rng);  // origin strictly feasible
    }
    G.bottomRows(4) = unit_box_rows(2);
    h.tail(4).setConstant(5.0);
    Vec c(2);
    c << g(rng), g(rng);
    const auto r = lp_maximize(c, G, h, Vec::Zero(2));
    ASSERT_EQ(r.status, LpStatus::Optimal);

    std::vector<oracle::Lp2dRow> rows;
    for (int i = 0; i < m + 4; ++i) rows.push_back({G(i, 0), G(i, 1), h[i]});
    double best = -1e300;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        const double det = rows[i].alpha * rows[j].beta - rows[i].beta * rows[j].alpha;
        if (std::abs(det) < 1e-14) continue;
        Vec x(2);
        x << (rows[i].delta * rows[j].beta - rows[i].beta * rows[j].delta) / det,
            (rows[i].alpha * rows[j].delta - rows[i].delta * rows[j].alpha) / det;
        if (((G * x - h).array() > 1e-9).any()) continue;
        best = std::max(best, c.dot(x));
      }
    }
    EXPECT_NEAR(r.value, best, 1e-9 * (1.0 + std::abs(best)));
    EXPECT_LE((G * r.x - h).maxCoeff(), 1e-9);
  }
}

TEST(Lp, HigherDimensionalBoxWithCut) {
  const int n = 5;
  Mat G(2 * n + 1, n);
  G << unit_box_rows(n), Mat::Ones(1, n);
  Vec h = Vec::Ones(2 * n + 1);
  h[2 * n] = 2.5;
  const auto r = lp_maximize(Vec::Ones(n), G, h, Vec::Zero(n));
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, 2.5, 1e-12);
}
