#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "metric_grouper/ablation.hpp"
#include "metric_grouper/clustering.hpp"
#include "metric_grouper/composition.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/hashing.hpp"
#include "metric_grouper/kmeans.hpp"
#include "metric_grouper/lexicon.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/text.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

/// Every knob of the pipeline. Defaults reproduce the published settings
/// where they exist (t = 3, lambda = 0.002, mu = 0.03, output 50, dropout 0.5).
struct PipelineConfig {
  // [data] -- paths are not part of the config hash
  std::string corpus;
  std::string eval_corpus;  // defaults to corpus
  std::string dev_corpus;
  std::string vectors;
  std::string taxonomy;
  UnknownPolicy unknown_policy = UnknownPolicy::kZeroVector;

  // [pairs]
  double eta = 0.3;
  std::size_t max_pos = 0;  // 0 = no cap
  bool allow_replacement = false;
  double jcn_cap = 1e6;

  // [network]
  NetworkShape shape;

  // [training]
  TrainConfig train;

  // [composition]
  CompositionMode mode = CompositionMode::kAttention;

  // [clustering]
  int k = 0;  // 0 = number of gold groups in the evaluation corpus
  ClusterMetric metric = ClusterMetric::kEuclidean;
  ClusterMetric baseline_metric = ClusterMetric::kCosine;
  int n_init = 10;
  int max_iter = 300;

  // [eval]
  int runs = 10;
  std::vector<std::string> methods{"addml", "avg", "min", "max", "ap"};

  // [ablation]
  std::vector<AblationCombo> combos{{CompositionMode::kAp, 0, false},
                                    {CompositionMode::kAttention, 1, true},
                                    {CompositionMode::kAttention, 3, true}};

  // [split]
  double train_ratio = 0.3;
  double test_ratio = 0.5;
  double dev_ratio = 0.2;

  // [run]
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  PairOptions pair_options() const {
    PairOptions o;
    o.eta = eta;
    o.seed = seed;
    if (max_pos > 0) o.max_pos = max_pos;
    o.allow_replacement = allow_replacement;
    o.jcn.cap = jcn_cap;
    return o;
  }

  TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
  }

  KMeansOptions kmeans_options(int resolved_k, bool baseline) const {
    KMeansOptions o;
    o.k = resolved_k;
    o.metric = baseline ? baseline_metric : metric;
    o.seed = seed;
    o.n_init = n_init;
    o.max_iter = max_iter;
    return o;
  }

  void validate() const {
    if (!(eta > 0)) throw ConfigError("eta must be positive");
    if (!(jcn_cap > 0)) throw ConfigError("jcn-cap must be positive");
    if (shape.layers < 1 || shape.output_dim < 1) throw ConfigError("network layers and output-dim must be positive");
    if (!(shape.dropout_rate >= 0 && shape.dropout_rate < 1)) throw ConfigError("dropout must be in [0, 1)");
    train.validate();
    if (k < 0) throw ConfigError("k must be non-negative");
    if (n_init < 1 || max_iter < 1) throw ConfigError("n-init and max-iter must be positive");
    if (runs < 1) throw ConfigError("runs must be positive");
    for (const auto& m : methods) {
      if (m != "addml") parse_composition_mode(m);
    }
    for (const auto& c : combos) c.validate();
    if (train_ratio < 0 || test_ratio < 0 || dev_ratio < 0 ||
        std::abs(train_ratio + test_ratio + dev_ratio - 1.0) > 1e-9) {
      throw ConfigError("split ratios must be non-negative and sum to 1");
    }
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  const auto s = text::lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v + ",") {
    if (c == ',') {
      auto t = text::split_ws(cur);
      if (!t.empty()) out.push_back(t.front());
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& v) { return text::join(v, ","); }

// Shortest text that parses back to the same double.
inline std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// A config key: INI `[section] name = value`, also settable by `--name`.
struct ConfigKey {
  std::string section;
  std::string name;
  bool hashed;
  std::string help;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using C = PipelineConfig;
  using detail::num;
  using detail::parse_bool;
  using detail::parse_number;
  static const std::vector<ConfigKey> keys = {
      {"data", "corpus", false, "training corpus (JSONL)", [](C& c, const std::string& v) { c.corpus = v; },
       [](const C& c) { return c.corpus; }},
      {"data", "eval-corpus", false, "corpus to cluster and score (default: --corpus)",
       [](C& c, const std::string& v) { c.eval_corpus = v; }, [](const C& c) { return c.eval_corpus; }},
      {"data", "dev-corpus", false, "development corpus for early stopping",
       [](C& c, const std::string& v) { c.dev_corpus = v; }, [](const C& c) { return c.dev_corpus; }},
      {"data", "vectors", false, "word vector file", [](C& c, const std::string& v) { c.vectors = v; },
       [](const C& c) { return c.vectors; }},
      {"data", "taxonomy", false, "taxonomy file (JSONL)", [](C& c, const std::string& v) { c.taxonomy = v; },
       [](const C& c) { return c.taxonomy; }},
      {"data", "unknown-policy", true, "zero-vector|skip-token",
       [](C& c, const std::string& v) { c.unknown_policy = parse_unknown_policy(v); },
       [](const C& c) { return to_string(c.unknown_policy); }},

      {"pairs", "eta", true, "similarity threshold for incompatible phrases",
       [](C& c, const std::string& v) { c.eta = parse_number<double>(v); }, [](const C& c) { return num(c.eta); }},
      {"pairs", "max-pos", true, "cap on positive pairs (0 = none)",
       [](C& c, const std::string& v) { c.max_pos = parse_number<std::size_t>(v); },
       [](const C& c) { return std::to_string(c.max_pos); }},
      {"pairs", "allow-replacement", true, "sample negatives with replacement when the pool is short",
       [](C& c, const std::string& v) { c.allow_replacement = parse_bool(v); },
       [](const C& c) { return std::string(c.allow_replacement ? "true" : "false"); }},
      {"pairs", "jcn-cap", true, "similarity returned for identical concepts",
       [](C& c, const std::string& v) { c.jcn_cap = parse_number<double>(v); },
       [](const C& c) { return num(c.jcn_cap); }},

      {"network", "layers", true, "number of weight layers",
       [](C& c, const std::string& v) { c.shape.layers = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.shape.layers); }},
      {"network", "output-dim", true, "length of the learned representation",
       [](C& c, const std::string& v) { c.shape.output_dim = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.shape.output_dim); }},
      {"network", "hidden", true, "comma-separated hidden widths (empty = geometric)",
       [](C& c, const std::string& v) {
         c.shape.hidden.clear();
         for (const auto& w : detail::split_list(v)) c.shape.hidden.push_back(parse_number<int>(w));
       },
       [](const C& c) {
         std::vector<std::string> s;
         for (int w : c.shape.hidden) s.push_back(std::to_string(w));
         return detail::join_list(s);
       }},
      {"network", "activation", true, "tanh|identity|relu",
       [](C& c, const std::string& v) { c.shape.activation = parse_activation(v); },
       [](const C& c) { return to_string(c.shape.activation); }},
      {"network", "dropout", true, "dropout rate on hidden layers",
       [](C& c, const std::string& v) { c.shape.dropout_rate = parse_number<double>(v); },
       [](const C& c) { return num(c.shape.dropout_rate); }},

      {"training", "margin-t", true, "margin threshold t (> 1)",
       [](C& c, const std::string& v) { c.train.margin_t = parse_number<double>(v); },
       [](const C& c) { return num(c.train.margin_t); }},
      {"training", "beta", true, "softplus sharpness",
       [](C& c, const std::string& v) { c.train.beta = parse_number<double>(v); },
       [](const C& c) { return num(c.train.beta); }},
      {"training", "lambda", true, "L2 regularization",
       [](C& c, const std::string& v) { c.train.lambda = parse_number<double>(v); },
       [](const C& c) { return num(c.train.lambda); }},
      {"training", "learning-rate", true, "SGD step size",
       [](C& c, const std::string& v) { c.train.learning_rate = parse_number<double>(v); },
       [](const C& c) { return num(c.train.learning_rate); }},
      {"training", "epochs", true, "passes over the pairs",
       [](C& c, const std::string& v) { c.train.epochs = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.train.epochs); }},
      {"training", "finetune-attention", true, "learn W_a",
       [](C& c, const std::string& v) { c.train.finetune_attention = parse_bool(v); },
       [](const C& c) { return std::string(c.train.finetune_attention ? "true" : "false"); }},
      {"training", "finetune-embeddings", true, "update word vectors during training",
       [](C& c, const std::string& v) { c.train.finetune_embeddings = parse_bool(v); },
       [](const C& c) { return std::string(c.train.finetune_embeddings ? "true" : "false"); }},
      {"training", "early-stop-patience", true, "epochs without dev purity gain before stopping (0 = off)",
       [](C& c, const std::string& v) { c.train.early_stop_patience = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.train.early_stop_patience); }},

      {"composition", "mode", true, "attention|avg|min|max|ap",
       [](C& c, const std::string& v) { c.mode = parse_composition_mode(v); },
       [](const C& c) { return to_string(c.mode); }},

      {"clustering", "k", true, "number of clusters (0 = number of gold groups)",
       [](C& c, const std::string& v) { c.k = parse_number<int>(v); }, [](const C& c) { return std::to_string(c.k); }},
      {"clustering", "metric", true, "euclidean|cosine for the learned representation",
       [](C& c, const std::string& v) { c.metric = parse_cluster_metric(v); },
       [](const C& c) { return to_string(c.metric); }},
      {"clustering", "baseline-metric", true, "euclidean|cosine for baselines",
       [](C& c, const std::string& v) { c.baseline_metric = parse_cluster_metric(v); },
       [](const C& c) { return to_string(c.baseline_metric); }},
      {"clustering", "n-init", true, "k-means restarts",
       [](C& c, const std::string& v) { c.n_init = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.n_init); }},
      {"clustering", "max-iter", true, "Lloyd iteration cap",
       [](C& c, const std::string& v) { c.max_iter = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.max_iter); }},

      {"eval", "runs", true, "clustering repetitions averaged per method",
       [](C& c, const std::string& v) { c.runs = parse_number<int>(v); },
       [](const C& c) { return std::to_string(c.runs); }},
      {"eval", "methods", true, "comma list of addml|avg|min|max|ap",
       [](C& c, const std::string& v) { c.methods = detail::split_list(v); },
       [](const C& c) { return detail::join_list(c.methods); }},

      {"ablation", "combos", true, "comma list of mode:layers:train",
       [](C& c, const std::string& v) {
         c.combos.clear();
         for (const auto& s : detail::split_list(v)) c.combos.push_back(parse_combo(s));
       },
       [](const C& c) {
         std::vector<std::string> s;
         for (const auto& x : c.combos) {
           s.push_back(to_string(x.mode) + ":" + std::to_string(x.mlp_layers) + ":" + (x.train ? "true" : "false"));
         }
         return detail::join_list(s);
       }},

      {"split", "train-ratio", true, "fraction of sentences for training",
       [](C& c, const std::string& v) { c.train_ratio = parse_number<double>(v); },
       [](const C& c) { return num(c.train_ratio); }},
      {"split", "test-ratio", true, "fraction of sentences for testing",
       [](C& c, const std::string& v) { c.test_ratio = parse_number<double>(v); },
       [](const C& c) { return num(c.test_ratio); }},
      {"split", "dev-ratio", true, "fraction of sentences for development",
       [](C& c, const std::string& v) { c.dev_ratio = parse_number<double>(v); },
       [](const C& c) { return num(c.dev_ratio); }},

      {"run", "seed", true, "random seed for every stage",
       [](C& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"run", "out-dir", false, "output directory", [](C& c, const std::string& v) { c.out_dir = v; },
       [](const C& c) { return c.out_dir; }},
  };
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

/// Applies an INI document on top of `cfg`. Unknown sections or keys are errors.
inline void apply_ini(PipelineConfig& cfg, std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const auto* key = find_config_key(name);
      if (!key || key->section != section) throw ConfigError("config: unknown key [" + section + "] " + name);
      try {
        key->set(cfg, value.data());
      } catch (const Error& e) {
        throw ConfigError("config: [" + section + "] " + name + ": " + e.what());
      }
    }
  }
}

inline PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  apply_ini(cfg, in);
  return cfg;
}

/// `section.key=value` lines for every hashed key, in a fixed order.
inline std::string canonical_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) {
    if (k.hashed) out += k.section + "." + k.name + "=" + k.get(cfg) + "\n";
  }
  return out;
}

inline std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

/// Full INI rendering, suitable as a starting config file.
inline std::string render_ini(const PipelineConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += "; " + k.help + "\n" + k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace metric_grouper
