#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "metric_grouper/errors.hpp"
#include "metric_grouper/random.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

enum class ClusterMetric { kEuclidean, kCosine };

inline std::string to_string(ClusterMetric m) { return m == ClusterMetric::kEuclidean ? "euclidean" : "cosine"; }

inline ClusterMetric parse_cluster_metric(std::string_view s) {
  if (s == "euclidean") return ClusterMetric::kEuclidean;
  if (s == "cosine") return ClusterMetric::kCosine;
  throw ConfigError("metric must be euclidean or cosine, got '" + std::string(s) + "'");
}

struct KMeansOptions {
  int k = 2;
  ClusterMetric metric = ClusterMetric::kEuclidean;
  std::uint64_t seed = 42;
  int n_init = 10;
  int max_iter = 300;
  bool allow_degenerate = true;  // false: throw DegenerateError on empty clusters
};

/// Result over an indexed point set.
struct KMeansResult {
  std::vector<int> assignment;
  std::vector<Vector> centroids;
  double inertia = 0;
  std::vector<int> empty_clusters;
  std::vector<double> inertia_trace;  // after each Lloyd update, best restart
  int iterations = 0;
};

/// Phrase-keyed clustering.
struct Clustering {
  std::map<std::string, int> assignments;
  std::vector<Vector> centroids;
  double inertia = 0;
  std::vector<int> empty_clusters;
  std::vector<double> inertia_trace;

  bool degenerate() const { return !empty_clusters.empty(); }
};

namespace detail {

inline double inertia_of(const std::vector<Vector>& pts, const std::vector<int>& assign,
                         const std::vector<Vector>& centroids) {
  double s = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += (pts[i] - centroids[static_cast<std::size_t>(assign[i])]).squaredNorm();
  return s;
}

inline std::vector<Vector> kmeanspp_seed(const std::vector<Vector>& pts, int k, Rng& rng) {
  const std::size_t n = pts.size();
  std::vector<Vector> centers;
  std::vector<bool> taken(n, false);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  centers.push_back(pts[pick]);
  taken[pick] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (pts[i] - centers[0]).squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (double v : d2) total += v;
    if (total > 0) {
      std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      // All remaining mass is on existing centers (duplicates).
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i]) free.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> any(0, free.size() - 1);
      pick = free[any(rng)];
    }
    taken[pick] = true;
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (pts[i] - centers.back()).squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd(const std::vector<Vector>& pts, std::vector<Vector> centroids, int max_iter) {
  const std::size_t n = pts.size();
  const int k = static_cast<int>(centroids.size());
  KMeansResult r;
  std::vector<int> prev;
  std::vector<int> assign(n, 0);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (pts[i] - centroids[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    // Re-seed empty clusters at the point farthest from its centroid.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assign) ++sizes[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      double far = 0;
      std::size_t far_i = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(assign[i])] < 2) continue;
        const double d = (pts[i] - centroids[static_cast<std::size_t>(assign[i])]).squaredNorm();
        if (d > far) {
          far = d;
          far_i = i;
        }
      }
      if (far_i == n) continue;  // nothing to move: stays empty
      --sizes[static_cast<std::size_t>(assign[far_i])];
      assign[far_i] = c;
      ++sizes[static_cast<std::size_t>(c)];
      centroids[static_cast<std::size_t>(c)] = pts[far_i];
    }
    if (assign == prev) break;
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) continue;
      Vector sum = Vector::Zero(pts[0].size());
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) sum += pts[i];
      }
      centroids[static_cast<std::size_t>(c)] = sum / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
    }
    prev = assign;
    r.inertia_trace.push_back(inertia_of(pts, assign, centroids));
    r.iterations = it + 1;
  }
  r.assignment = std::move(assign);
  r.inertia = inertia_of(pts, r.assignment, centroids);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int a : r.assignment) ++sizes[static_cast<std::size_t>(a)];
  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0) r.empty_clusters.push_back(c);
  }
  r.centroids = std::move(centroids);
  return r;
}

inline std::vector<Vector> prepare_points(std::vector<Vector> pts, ClusterMetric metric) {
  if (metric == ClusterMetric::kCosine) {
    for (auto& p : pts) {
      const double norm = p.norm();
      if (norm > 0) p /= norm;
    }
  }
  return pts;
}

}  // namespace detail

/// k-means++ seeding, Lloyd iterations to a fixpoint (or max_iter), best of
/// n_init restarts by inertia. Cosine runs Euclidean Lloyd on unit-normalized
/// points; inertia is reported in that space.
inline KMeansResult kmeans(const std::vector<Vector>& points, const KMeansOptions& opt) {
  if (opt.k < 1) throw ConfigError("k must be at least 1");
  if (points.size() < static_cast<std::size_t>(opt.k)) {
    throw TooFewPointsError(std::to_string(points.size()) + " points cannot form " + std::to_string(opt.k) +
                            " clusters");
  }
  if (opt.n_init < 1 || opt.max_iter < 1) throw ConfigError("n-init and max-iter must be positive");
  for (const auto& p : points) {
    if (p.size() != points[0].size()) throw DimensionMismatchError("points have different lengths");
  }
  const auto pts = detail::prepare_points(points, opt.metric);
  Rng rng(opt.seed);
  KMeansResult best;
  bool have = false;
  for (int run = 0; run < opt.n_init; ++run) {
    auto r = detail::lloyd(pts, detail::kmeanspp_seed(pts, opt.k, rng), opt.max_iter);
    if (!have || r.inertia < best.inertia) {
      best = std::move(r);
      have = true;
    }
  }
  if (!best.empty_clusters.empty() && !opt.allow_degenerate) {
    throw DegenerateError("duplicate points leave " + std::to_string(best.empty_clusters.size()) +
                          " clusters empty");
  }
  return best;
}

/// Phrase-keyed form. Points are ordered by phrase before seeding, so the
/// result does not depend on insertion order.
inline Clustering kmeans(const std::map<std::string, Vector>& points, const KMeansOptions& opt) {
  std::vector<std::string> names;
  std::vector<Vector> pts;
  for (const auto& [name, v] : points) {
    names.push_back(name);
    pts.push_back(v);
  }
  auto r = kmeans(pts, opt);
  Clustering c;
  for (std::size_t i = 0; i < names.size(); ++i) c.assignments[names[i]] = r.assignment[i];
  c.centroids = std::move(r.centroids);
  c.inertia = r.inertia;
  c.empty_clusters = std::move(r.empty_clusters);
  c.inertia_trace = std::move(r.inertia_trace);
  return c;
}

}  // namespace metric_grouper
