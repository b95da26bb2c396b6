#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace parkvio {

// Kuhn-Munkres assignment with potentials, O(n^2 m). Minimizes total cost
// over one-to-one assignments of min(n, m) pairs; returns (row, col) pairs.
inline std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return {};
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: costs must be finite");

  // algorithm wants rows <= cols; transpose if needed
  const bool transposed = rows > cols;
  const Eigen::MatrixXd c = transposed ? cost.transpose() : cost;
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0);  // match[j] = row assigned to column j (1-based)
  std::vector<int> way(m + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::pair<int, int>> out;
  out.reserve(n);
  for (int j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    if (transposed) out.emplace_back(j - 1, match[j] - 1);
    else out.emplace_back(match[j] - 1, j - 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double assignment_cost(const Eigen::MatrixXd& cost,
                              const std::vector<std::pair<int, int>>& assignment) {
  double total = 0;
  for (const auto& [r, c] : assignment) total += cost(r, c);
  return total;
}

}  // namespace parkvio
