#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

/// Minimum k-means inertia over every assignment of points to at most k
/// clusters, each centroid being its cluster mean.
inline double optimal_inertia(const std::vector<Eigen::VectorXd>& pts, int k) {
  const std::size_t n = pts.size();
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == n) {
      double total = 0;
      for (int c = 0; c < used; ++c) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(pts[0].size());
        int cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
          if (label[j] == c) {
            mean += pts[j];
            ++cnt;
          }
        }
        mean /= cnt;
        for (std::size_t j = 0; j < n; ++j) {
          if (label[j] == c) total += (pts[j] - mean).squaredNorm();
        }
      }
      best = std::min(best, total);
      return;
    }
    // Restricted growth strings enumerate each set partition once.
    for (int c = 0; c < std::min(used + 1, k); ++c) {
      label[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace testutil
