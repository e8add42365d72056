#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "metric_grouper/composition.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/random.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

/// Gradient of the per-pair objective w.r.t. everything trainable.
struct FullGradient {
  PairLoss loss;
  NetworkGrad net;
  Vector w_a;                               // empty unless attention is tuned
  std::map<std::string, Vector> embeddings;  // only with finetune_embeddings
};

namespace detail {

struct SideTrace {
  CompositionTrace trace;
  std::vector<std::string> context_tokens;
  std::vector<std::string> phrase_tokens;  // tokens that contributed to p
  Vector x;
};

inline SideTrace trace_sample(const AspectSample& s, const WordVectorTable& table, const MetricNetwork& net) {
  SideTrace side;
  const Vector p = phrase_vector(s.phrase, table);
  for (const auto& t : text::split_ws(s.phrase)) {
    if (table.lookup(t)) side.phrase_tokens.push_back(t);
  }
  ResolvedContext rc;
  if (net.mode != CompositionMode::kAp) {
    rc = resolve_context(s.context_tokens, table);
    if (rc.vectors.empty()) throw EmptyContextError("sample for '" + s.phrase + "' has no usable context");
  }
  side.x = compose_vectors(rc.vectors, p, net.attention, net.mode, &side.trace).x;
  side.context_tokens = std::move(rc.tokens);
  return side;
}

inline void accumulate_embedding_grad(const SideTrace& side, const CompositionGrad& cg, const WordVectorTable& table,
                                      std::map<std::string, Vector>& out) {
  auto add = [&](const std::string& token, const Vector& g) {
    if (!table.contains(token)) return;  // unknown tokens are not parameters
    auto [it, fresh] = out.try_emplace(token, g);
    if (!fresh) it->second += g;
  };
  for (std::size_t i = 0; i < side.context_tokens.size(); ++i) add(side.context_tokens[i], cg.context[i]);
  const double share = 1.0 / static_cast<double>(side.phrase_tokens.size());
  for (const auto& t : side.phrase_tokens) add(t, share * cg.phrase);
}

}  // namespace detail

/// Gradients of the per-pair objective sigma(omega)/2 + (lambda/2) R for a
/// raw sample pair, flowing through composition into W_a (and embeddings)
/// when the config asks for it.
inline FullGradient gradients(const MetricNetwork& net, const SamplePair& pair, const WordVectorTable& table,
                              const TrainConfig& cfg, Rng* dropout_rng = nullptr) {
  const auto left = detail::trace_sample(pair.left, table, net);
  const auto right = detail::trace_sample(pair.right, table, net);
  auto pg = pair_gradients(net, left.x, right.x, pair.label, cfg, true, dropout_rng);
  FullGradient out{pg.loss, std::move(pg.net), {}, {}};
  const bool tune_attention = cfg.finetune_attention && net.mode == CompositionMode::kAttention;
  if (!tune_attention && !cfg.finetune_embeddings) return out;
  const auto gl = compose_backward(left.trace, net.attention, pg.dxi);
  const auto gr = compose_backward(right.trace, net.attention, pg.dxj);
  if (tune_attention) out.w_a = gl.w_a + gr.w_a;
  if (cfg.finetune_embeddings) {
    detail::accumulate_embedding_grad(left, gl, table, out.embeddings);
    detail::accumulate_embedding_grad(right, gr, table, out.embeddings);
  }
  return out;
}

inline ComposedPair compose_pair(const SamplePair& pair, const WordVectorTable& table, const MetricNetwork& net) {
  return {compose(pair.left, table, net.attention, net.mode).x, compose(pair.right, table, net.attention, net.mode).x,
          pair.label};
}

inline std::vector<ComposedPair> compose_pairs(const std::vector<SamplePair>& pairs, const WordVectorTable& table,
                                               const MetricNetwork& net) {
  std::vector<ComposedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(compose_pair(p, table, net));
  return out;
}

struct EpochStats {
  int epoch = 0;
  double mean_objective = 0;   // objective / #pairs, eval mode, after the epoch
  double mean_train_loss = 0;  // running mean of per-step objective, with dropout
  std::optional<double> dev_score;
};

struct TrainResult {
  MetricNetwork net;
  std::vector<EpochStats> history;
  std::map<std::string, Vector> tuned_embeddings;  // empty unless embeddings were tuned
  int best_epoch = 0;
};

/// Entries of `tuned` that differ from `base`.
inline std::map<std::string, Vector> embedding_changes(const WordVectorTable& base, const WordVectorTable& tuned) {
  std::map<std::string, Vector> out;
  for (const auto& [token, v] : tuned.entries()) {
    const Vector* orig = base.find(token);
    if (orig && *orig != v) out[token] = v;
  }
  return out;
}

/// Higher is better, e.g. purity on a development corpus.
using DevScorer = std::function<double(const MetricNetwork&, const WordVectorTable&)>;

/// Per-pair stochastic gradient descent over seeded epoch shuffles.
/// Deterministic for a given seed.
inline TrainResult train(MetricNetwork net, const std::vector<SamplePair>& pairs, const WordVectorTable& table,
                         const TrainConfig& cfg, const DevScorer& dev_scorer = {}) {
  cfg.validate();
  net.validate();
  if (pairs.empty()) throw PreconditionError("training needs at least one pair");
  if (net.input_dim() != composed_dim(net.mode, table.dimension())) {
    throw DimensionMismatchError("network input does not match composed vector length for mode " +
                                 to_string(net.mode));
  }
  Rng rng(cfg.seed);
  WordVectorTable tuned = table;
  const bool tune_attention = cfg.finetune_attention && net.mode == CompositionMode::kAttention;
  const double lr = cfg.learning_rate;

  TrainResult result;
  std::optional<MetricNetwork> best_net;
  std::map<std::string, Vector> best_embeddings;
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double running = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto g = gradients(net, pairs[order[step]], tuned, cfg, &rng);
      running += g.loss.loss + regularizer(net, cfg);
      for (std::size_t m = 0; m < net.layers.size(); ++m) {
        net.layers[m].W.noalias() -= lr * g.net.W[m];
        net.layers[m].b.noalias() -= lr * g.net.b[m];
      }
      if (tune_attention) net.attention.w_a.noalias() -= lr * g.w_a;
      for (const auto& [token, ge] : g.embeddings) {
        Vector* v = tuned.find_mutable(token);
        *v -= lr * ge;
        if (!v->allFinite()) throw DivergenceError(static_cast<std::size_t>(epoch), step);
      }
      if (!net.all_finite()) throw DivergenceError(static_cast<std::size_t>(epoch), step);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_train_loss = running / static_cast<double>(pairs.size());
    const auto composed = compose_pairs(pairs, tuned, net);
    stats.mean_objective = objective(net, composed, cfg) / static_cast<double>(pairs.size());
    if (dev_scorer) stats.dev_score = dev_scorer(net, tuned);
    result.history.push_back(stats);

    if (dev_scorer && cfg.early_stop_patience > 0) {
      if (*stats.dev_score > best_score) {
        best_score = *stats.dev_score;
        best_net = net;
        result.best_epoch = epoch;
        since_best = 0;
        if (cfg.finetune_embeddings) best_embeddings = embedding_changes(table, tuned);
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }

  if (best_net) {
    net = std::move(*best_net);
    result.tuned_embeddings = std::move(best_embeddings);
  } else {
    result.best_epoch = static_cast<int>(result.history.size());
    if (cfg.finetune_embeddings) result.tuned_embeddings = embedding_changes(table, tuned);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace metric_grouper
