#pragma once

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metric_grouper/composition.hpp"
#include "metric_grouper/corpus.hpp"
#include "metric_grouper/kmeans.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/parallel.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

/// What to cluster: composed vectors under `mode`, optionally mapped
/// through a trained network (the learned-metric path).
struct ClusterSpec {
  CompositionMode mode = CompositionMode::kAttention;
  const MetricNetwork* net = nullptr;
  KMeansOptions kmeans;
};

/// One composed input per distinct phrase, context = all its sentences.
inline std::map<std::string, Vector> composed_points(const AnnotatedCorpus& corpus, const WordVectorTable& table,
                                                     CompositionMode mode, const AttentionParams& attention) {
  const auto phrases = corpus.phrases();
  std::vector<Vector> xs(phrases.size());
  parallel_for(phrases.size(), [&](std::size_t i) {
    xs[i] = compose_test_phrase(phrases[i], corpus, table, attention, mode).x;
  });
  std::map<std::string, Vector> out;
  for (std::size_t i = 0; i < phrases.size(); ++i) out.emplace(phrases[i], std::move(xs[i]));
  return out;
}

/// Points that k-means will see: h^(M) for the network path, x otherwise.
inline std::map<std::string, Vector> cluster_points(const AnnotatedCorpus& corpus, const WordVectorTable& table,
                                                    const ClusterSpec& spec) {
  if (spec.net && spec.net->mode != spec.mode) throw ConfigError("network was trained for a different mode");
  const AttentionParams attention =
      spec.net ? spec.net->attention : AttentionParams::zeros(table.dimension());
  auto points = composed_points(corpus, table, spec.mode, attention);
  if (spec.net) {
    for (auto& [_, v] : points) v = embed(*spec.net, v);
  }
  return points;
}

inline Clustering cluster_corpus(const AnnotatedCorpus& corpus, const WordVectorTable& table,
                                 const ClusterSpec& spec) {
  return kmeans(cluster_points(corpus, table, spec), spec.kmeans);
}

// ---- text output ------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_vector(const Vector& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ' ';
    out += format_double(v[k]);
  }
  return out;
}

/// `phrase<TAB>cluster_id` lines after a `# config_hash=` comment.
inline std::string format_clusters_tsv(const Clustering& c, const std::string& config_hash) {
  std::string out = "# config_hash=" + config_hash + "\n";
  for (const auto& [phrase, id] : c.assignments) out += phrase + "\t" + std::to_string(id) + "\n";
  return out;
}

inline std::string format_centroids_tsv(const Clustering& c) {
  std::string out;
  for (std::size_t k = 0; k < c.centroids.size(); ++k) out += std::to_string(k) + "\t" + format_vector(c.centroids[k]) + "\n";
  return out;
}

inline std::string format_points_tsv(const std::map<std::string, Vector>& points) {
  std::string out;
  for (const auto& [phrase, v] : points) out += phrase + "\t" + format_vector(v) + "\n";
  return out;
}

struct ClusterFile {
  std::string config_hash;
  std::map<std::string, int> assignments;
};

inline ClusterFile parse_clusters_tsv(std::istream& in) {
  ClusterFile f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# config_hash=", 0) == 0) {
      f.config_hash = line.substr(14);
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("expected phrase<TAB>cluster_id", lineno);
    try {
      f.assignments[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("bad cluster id", lineno);
    }
  }
  return f;
}

}  // namespace metric_grouper
