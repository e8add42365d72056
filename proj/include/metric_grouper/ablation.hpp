#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/clustering.hpp"
#include "metric_grouper/evaluation.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/text.hpp"
#include "metric_grouper/trainer.hpp"

namespace metric_grouper {

/// One module combination: composition, network depth (0 = none,
/// 1 = single linear layer, 3 = full MLP) and whether the metric is trained.
struct AblationCombo {
  CompositionMode mode = CompositionMode::kAttention;
  int mlp_layers = 3;
  bool train = true;

  /// e.g. "ap", "atn+ml", "atn+mlp+ml".
  std::string name() const {
    std::string n = mode == CompositionMode::kAttention ? "atn" : to_string(mode);
    if (mlp_layers == 1 && !train) n += "+lin";
    if (mlp_layers == 3) n += "+mlp";
    if (train) n += "+ml";
    return n;
  }

  void validate() const {
    if (mlp_layers != 0 && mlp_layers != 1 && mlp_layers != 3) throw ConfigError("mlp_layers must be 0, 1 or 3");
    if (train && mlp_layers == 0) throw ConfigError("metric training needs at least one layer");
  }

  friend bool operator==(const AblationCombo&, const AblationCombo&) = default;
};

/// Parses "mode:layers:train", e.g. "attention:3:true".
inline AblationCombo parse_combo(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ':') {
      parts.push_back(spec.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 3) throw ConfigError("combo '" + spec + "' must be mode:layers:train");
  AblationCombo c;
  c.mode = parse_composition_mode(parts[0]);
  try {
    c.mlp_layers = std::stoi(parts[1]);
  } catch (const std::exception&) {
    throw ConfigError("combo '" + spec + "' has a non-integer layer count");
  }
  const auto t = text::lower(parts[2]);
  if (t == "true" || t == "1" || t == "yes") {
    c.train = true;
  } else if (t == "false" || t == "0" || t == "no") {
    c.train = false;
  } else {
    throw ConfigError("combo '" + spec + "' has a bad train flag");
  }
  c.validate();
  return c;
}

inline const AblationCombo kApReference{CompositionMode::kAp, 0, false};

struct AblationSettings {
  NetworkShape shape;
  TrainConfig train;
  KMeansOptions kmeans;  // learned-metric rows
  ClusterMetric baseline_metric = ClusterMetric::kCosine;
  int runs = 10;
  std::uint64_t seed = 42;
};

struct AblationRow {
  AblationCombo combo;
  MethodReport report;
  double purity_gain_pct = 0;   // relative to the AP row, higher purity is better
  double entropy_gain_pct = 0;  // relative to the AP row, lower entropy is better
};

/// Network for a combo, or nullopt when it clusters raw composed vectors.
inline std::optional<MetricNetwork> combo_network(const AblationCombo& combo, const AblationSettings& s, int word_dim) {
  if (combo.mlp_layers == 0) return std::nullopt;
  NetworkShape shape = s.shape;
  if (combo.mlp_layers == 1) {
    shape.layers = 1;
    shape.hidden.clear();
    shape.activation = Activation::kIdentity;
  } else {
    shape.layers = 3;
  }
  return make_network(shape, combo.mode, word_dim, s.seed);
}

inline double gain_pct(double value, double reference, bool lower_is_better) {
  if (reference == 0) return 0.0;
  return (lower_is_better ? reference - value : value - reference) / reference * 100.0;
}

/// Runs every combo (plus the AP reference when absent) on shared pairs and
/// settings. Rows come back sorted by combo name.
inline std::vector<AblationRow> run_ablation(const AnnotatedCorpus& eval_corpus, const WordVectorTable& table,
                                             const std::vector<SamplePair>& pairs,
                                             std::vector<AblationCombo> combos, const AblationSettings& s) {
  if (std::find(combos.begin(), combos.end(), kApReference) == combos.end()) combos.push_back(kApReference);
  std::vector<AblationRow> rows;
  for (const auto& combo : combos) {
    combo.validate();
    auto net = combo_network(combo, s, table.dimension());
    WordVectorTable eval_table = table;
    if (net && combo.train) {
      auto result = train(*net, pairs, table, s.train);
      net = std::move(result.net);
      if (!result.tuned_embeddings.empty()) eval_table = table.with_overrides(result.tuned_embeddings);
    }
    EvalMethod m;
    m.name = combo.name();
    m.spec.mode = combo.mode;
    m.spec.net = net ? &*net : nullptr;
    m.spec.kmeans = s.kmeans;
    if (!net) m.spec.kmeans.metric = s.baseline_metric;
    rows.push_back({combo, evaluate_run(eval_corpus, eval_table, m, s.runs, s.seed), 0, 0});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.combo.name() < b.combo.name(); });
  const auto ap = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.combo == kApReference; });
  const double ap_purity = ap->report.purity_mean;
  const double ap_entropy = ap->report.entropy_mean;
  for (auto& r : rows) {
    r.purity_gain_pct = gain_pct(r.report.purity_mean, ap_purity, false);
    r.entropy_gain_pct = gain_pct(r.report.entropy_mean, ap_entropy, true);
  }
  return rows;
}

inline nlohmann::json ablation_json(const std::vector<AblationRow>& rows, const std::string& config_hash) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    auto j = to_json(r.report);
    j["combo"] = {{"mode", to_string(r.combo.mode)}, {"mlp_layers", r.combo.mlp_layers}, {"train", r.combo.train}};
    j["purity_gain_pct"] = r.purity_gain_pct;
    j["entropy_gain_pct"] = r.entropy_gain_pct;
    out.push_back(std::move(j));
  }
  return {{"config_hash", config_hash}, {"entropy_base", 2}, {"reference", kApReference.name()}, {"rows", out}};
}

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.combo.name().size());
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %7s  %12s  %7s\n", static_cast<int>(width), "combo", "purity", "up",
                "entropy(b2)", "up");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %6.1f%%  %12.4f  %6.1f%%\n", static_cast<int>(width),
                  r.combo.name().c_str(), r.report.purity_mean, r.purity_gain_pct, r.report.entropy_mean,
                  r.entropy_gain_pct);
    out += buf;
  }
  return out;
}

}  // namespace metric_grouper
