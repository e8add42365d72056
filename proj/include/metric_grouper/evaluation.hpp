#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/clustering.hpp"
#include "metric_grouper/corpus.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/parallel.hpp"

namespace metric_grouper {

/// counts[k][g]: phrases of gold group g placed in cluster k.
struct ContingencyTable {
  std::vector<int> cluster_ids;
  std::vector<int> group_ids;
  std::vector<std::vector<std::size_t>> counts;
  std::size_t total = 0;
};

inline ContingencyTable contingency(const std::map<std::string, int>& assignments,
                                    const std::map<std::string, int>& gold) {
  std::set<int> clusters;
  std::set<int> groups;
  for (const auto& [phrase, k] : assignments) {
    auto it = gold.find(phrase);
    if (it == gold.end()) throw MissingLabelError("no gold label for '" + phrase + "'");
    clusters.insert(k);
    groups.insert(it->second);
  }
  ContingencyTable t;
  t.cluster_ids.assign(clusters.begin(), clusters.end());
  t.group_ids.assign(groups.begin(), groups.end());
  t.counts.assign(t.cluster_ids.size(), std::vector<std::size_t>(t.group_ids.size(), 0));
  auto pos = [](const std::vector<int>& ids, int v) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), v) - ids.begin());
  };
  for (const auto& [phrase, k] : assignments) {
    ++t.counts[pos(t.cluster_ids, k)][pos(t.group_ids, gold.at(phrase))];
    ++t.total;
  }
  return t;
}

/// (1/N) sum_k max_g counts[k][g].
inline double purity(const ContingencyTable& t) {
  if (t.total == 0) return 0.0;
  std::size_t hit = 0;
  for (const auto& row : t.counts) hit += *std::max_element(row.begin(), row.end());
  return static_cast<double>(hit) / static_cast<double>(t.total);
}

/// Cluster-size-weighted within-cluster label entropy, in bits.
inline double entropy(const ContingencyTable& t) {
  if (t.total == 0) return 0.0;
  double e = 0;
  for (const auto& row : t.counts) {
    std::size_t nk = 0;
    for (auto c : row) nk += c;
    if (nk == 0) continue;
    double h = 0;
    for (auto c : row) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(nk);
      h -= p * std::log2(p);
    }
    e += static_cast<double>(nk) / static_cast<double>(t.total) * h;
  }
  return e;
}

inline double purity(const Clustering& c, const std::map<std::string, int>& gold) {
  return purity(contingency(c.assignments, gold));
}

inline double entropy(const Clustering& c, const std::map<std::string, int>& gold) {
  return entropy(contingency(c.assignments, gold));
}

/// Drops phrases without a gold label; returns how many were dropped.
inline std::size_t restrict_to_labeled(std::map<std::string, int>& assignments, const std::map<std::string, int>& gold) {
  std::size_t dropped = 0;
  for (auto it = assignments.begin(); it != assignments.end();) {
    if (gold.count(it->first)) {
      ++it;
    } else {
      it = assignments.erase(it);
      ++dropped;
    }
  }
  return dropped;
}

/// Number of distinct gold groups, the usual K.
inline int gold_group_count(const std::map<std::string, int>& gold) {
  std::set<int> g;
  for (const auto& [_, v] : gold) g.insert(v);
  return static_cast<int>(g.size());
}

struct MethodReport {
  std::string method;
  double purity_mean = 0;
  double entropy_mean = 0;
  std::vector<double> purity_runs;
  std::vector<double> entropy_runs;
  std::vector<std::uint64_t> seeds;
  std::size_t excluded_unlabeled = 0;
};

struct EvalMethod {
  std::string name;
  ClusterSpec spec;  // spec.kmeans.seed is replaced per run
};

/// Clusters `runs` times with seeds base_seed, base_seed+1, ... and averages
/// Purity and Entropy over the runs.
inline MethodReport evaluate_run(const AnnotatedCorpus& corpus, const WordVectorTable& table, const EvalMethod& method,
                                 int runs, std::uint64_t base_seed) {
  if (runs < 1) throw ConfigError("runs must be positive");
  const auto gold = gold_groups(corpus);
  if (gold.empty()) throw MissingLabelError("evaluation corpus has no gold labels");
  const auto points = cluster_points(corpus, table, method.spec);

  MethodReport rep;
  rep.method = method.name;
  rep.purity_runs.resize(static_cast<std::size_t>(runs));
  rep.entropy_runs.resize(static_cast<std::size_t>(runs));
  std::vector<std::size_t> excluded(static_cast<std::size_t>(runs));
  for (int r = 0; r < runs; ++r) rep.seeds.push_back(base_seed + static_cast<std::uint64_t>(r));
  parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
    KMeansOptions opt = method.spec.kmeans;
    opt.seed = rep.seeds[r];
    auto c = kmeans(points, opt);
    excluded[r] = restrict_to_labeled(c.assignments, gold);
    const auto t = contingency(c.assignments, gold);
    rep.purity_runs[r] = purity(t);
    rep.entropy_runs[r] = entropy(t);
  });
  rep.excluded_unlabeled = excluded.front();
  for (int r = 0; r < runs; ++r) {
    rep.purity_mean += rep.purity_runs[static_cast<std::size_t>(r)];
    rep.entropy_mean += rep.entropy_runs[static_cast<std::size_t>(r)];
  }
  rep.purity_mean /= runs;
  rep.entropy_mean /= runs;
  return rep;
}

inline nlohmann::json to_json(const MethodReport& r) {
  return {{"method", r.method},
          {"purity_mean", r.purity_mean},
          {"entropy_mean", r.entropy_mean},
          {"runs", r.purity_runs.size()},
          {"seeds", r.seeds},
          {"purity_runs", r.purity_runs},
          {"entropy_runs", r.entropy_runs},
          {"excluded_unlabeled", r.excluded_unlabeled}};
}

inline nlohmann::json metrics_json(const std::vector<MethodReport>& reports, const std::string& config_hash) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : reports) results.push_back(to_json(r));
  return {{"config_hash", config_hash}, {"entropy_base", 2}, {"results", std::move(results)}};
}

/// Aligned text table: method, mean purity, mean entropy.
inline std::string metrics_table(const std::vector<MethodReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.method.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %12s  %4s\n", static_cast<int>(width), "method", "purity",
                "entropy(b2)", "runs");
  out += buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %12.4f  %4zu\n", static_cast<int>(width), r.method.c_str(),
                  r.purity_mean, r.entropy_mean, r.purity_runs.size());
    out += buf;
  }
  return out;
}

}  // namespace metric_grouper
