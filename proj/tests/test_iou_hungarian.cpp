#include "parkvio/hungarian.hpp"
#include "parkvio/iou.hpp"
#include "parkvio/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace parkvio;

namespace {

Quad box(double x0, double y0, double x1, double y1) {
  return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

Quad rotated_rect(const Vec2& center, double heading, double w, double h) {
  const Mat2 R = (Mat2() << std::cos(heading), -std::sin(heading), std::sin(heading),
                  std::cos(heading))
                     .finished();
  return {center + R * Vec2(w / 2, h / 2), center + R * Vec2(w / 2, -h / 2),
          center + R * Vec2(-w / 2, -h / 2), center + R * Vec2(-w / 2, h / 2)};
}

// exhaustive assignment minimum for n x m, n <= 7
double brute_force_min(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  std::vector<int> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  if (n <= m) {
    std::sort(cols.begin(), cols.end());
    do {
      double total = 0;
      for (int i = 0; i < n; ++i) total += cost(i, cols[i]);
      best = std::min(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    do {
      double total = 0;
      for (int j = 0; j < m; ++j) total += cost(rows[j], j);
      best = std::min(best, total);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

}  // namespace

TEST(Iou, IdenticalQuadsGiveOne) {
  const Quad q = rotated_rect(Vec2(3, 4), 0.7, 2.5, 5.5);
  EXPECT_NEAR(iou(q, q), 1.0, 1e-12);
}

TEST(Iou, DisjointQuadsGiveZero) {
  EXPECT_EQ(iou(box(0, 0, 1, 1), box(5, 5, 6, 6)), 0.0);
}

// intersection 2, union 6 by rectangle arithmetic
TEST(Iou, OverlappingBoxes) {
  EXPECT_NEAR(iou(box(0, 0, 2, 2), box(1, 0, 3, 2)), 1.0 / 3.0, 1e-12);
}

TEST(Iou, DegenerateQuadFlagged) {
  const Quad line = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0), Vec2(3, 0)};
  bool degenerate = false;
  EXPECT_EQ(iou(line, box(0, 0, 1, 1), &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
}

TEST(Iou, SymmetricAndBounded) {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const Quad a = rotated_rect(Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                                rng.uniform(0, 2 * M_PI), rng.uniform(0.5, 4), rng.uniform(0.5, 4));
    const Quad b = rotated_rect(Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                                rng.uniform(0, 2 * M_PI), rng.uniform(0.5, 4), rng.uniform(0.5, 4));
    const double ab = iou(a, b);
    const double ba = iou(b, a);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, ba, 1e-9);
  }
}

TEST(Iou, OneIffEqualPointSets) {
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    const Quad a = rotated_rect(Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                                rng.uniform(0, 2 * M_PI), rng.uniform(1, 4), rng.uniform(1, 4));
    Quad b = a;
    EXPECT_NEAR(iou(a, b), 1.0, 1e-12);
    b[0] += Vec2(0.05, 0.0);  // perturb one corner
    EXPECT_LT(iou(a, b), 1.0 - 1e-6);
  }
}

TEST(Hungarian, SingleCell) {
  Eigen::MatrixXd c(1, 1);
  c << 1.0;
  const auto a = hungarian(c);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], std::make_pair(0, 0));
  EXPECT_NEAR(assignment_cost(c, a), 1.0, 1e-15);
}

// both permutations enumerated by hand: 4+8=12 vs 1+2=3
TEST(Hungarian, TwoByTwo) {
  Eigen::MatrixXd c(2, 2);
  c << 4, 1, 2, 8;
  const auto a = hungarian(c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], std::make_pair(0, 1));
  EXPECT_EQ(a[1], std::make_pair(1, 0));
  EXPECT_NEAR(assignment_cost(c, a), 3.0, 1e-15);
}

TEST(Hungarian, MatchesBruteForceSquare) {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 6);
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rng.uniform(0, 10);
    const auto a = hungarian(c);
    ASSERT_EQ(a.size(), static_cast<size_t>(n));
    EXPECT_NEAR(assignment_cost(c, a), brute_force_min(c), 1e-9);
  }
}

TEST(Hungarian, MatchesBruteForceRectangular) {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 5);
    const int m = rng.uniform_int(1, 7);
    Eigen::MatrixXd c(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) c(i, j) = rng.uniform(-5, 5);
    const auto a = hungarian(c);
    ASSERT_EQ(a.size(), static_cast<size_t>(std::min(n, m)));
    EXPECT_NEAR(assignment_cost(c, a), brute_force_min(c), 1e-9);
    // one-to-one
    std::set<int> rows, cols;
    for (const auto& [r, col] : a) {
      EXPECT_TRUE(rows.insert(r).second);
      EXPECT_TRUE(cols.insert(col).second);
    }
  }
}

TEST(Hungarian, RejectsNonFinite) {
  Eigen::MatrixXd c(1, 1);
  c << std::numeric_limits<double>::infinity();
  EXPECT_THROW(hungarian(c), std::invalid_argument);
}
