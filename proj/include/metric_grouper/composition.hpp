#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metric_grouper/corpus.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

enum class CompositionMode { kAttention, kAvg, kMin, kMax, kAp };

inline std::string to_string(CompositionMode m) {
  switch (m) {
    case CompositionMode::kAttention: return "attention";
    case CompositionMode::kAvg: return "avg";
    case CompositionMode::kMin: return "min";
    case CompositionMode::kMax: return "max";
    case CompositionMode::kAp: return "ap";
  }
  return "?";
}

inline CompositionMode parse_composition_mode(std::string_view s) {
  if (s == "attention" || s == "atn") return CompositionMode::kAttention;
  if (s == "avg") return CompositionMode::kAvg;
  if (s == "min") return CompositionMode::kMin;
  if (s == "max") return CompositionMode::kMax;
  if (s == "ap") return CompositionMode::kAp;
  throw ConfigError("mode must be one of attention|avg|min|max|ap, got '" + std::string(s) + "'");
}

/// Length of x for a given word dimension.
inline int composed_dim(CompositionMode mode, int d) { return mode == CompositionMode::kAp ? d : 2 * d; }

/// Scoring vector W_a of length 2d; score(e, p) = W_a . [e; p].
struct AttentionParams {
  Vector w_a;

  static AttentionParams zeros(int d) { return {Vector::Zero(2 * d)}; }
  int word_dim() const { return static_cast<int>(w_a.size() / 2); }
};

struct ComposedInput {
  Vector x;
  std::optional<Vector> attention_weights;
};

/// Softmax over W_a^T [e_i; p], computed with max subtraction.
inline Vector attention_weights(std::span<const Vector> context, const Vector& p, const AttentionParams& params) {
  if (context.empty()) throw EmptyContextError("attention over an empty context");
  const auto d = p.size();
  if (params.w_a.size() != 2 * d) {
    throw DimensionMismatchError("W_a has length " + std::to_string(params.w_a.size()) + ", expected " +
                                 std::to_string(2 * d));
  }
  const auto w_ctx = params.w_a.head(d);
  const double phrase_term = params.w_a.tail(d).dot(p);
  Vector scores(static_cast<Eigen::Index>(context.size()));
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (context[i].size() != d) throw DimensionMismatchError("context vector has wrong length");
    scores[static_cast<Eigen::Index>(i)] = w_ctx.dot(context[i]) + phrase_term;
  }
  const double top = scores.maxCoeff();
  Vector w = (scores.array() - top).exp().matrix();
  return w / w.sum();
}

/// Everything the backward pass needs from one composition.
struct CompositionTrace {
  CompositionMode mode = CompositionMode::kAttention;
  std::vector<Vector> context;
  Vector phrase;
  Vector weights;                // attention mode only
  std::vector<Eigen::Index> arg;  // min/max mode: winning context index per dimension
};

struct CompositionGrad {
  Vector w_a;                   // empty unless attention mode
  std::vector<Vector> context;  // d loss / d e_i
  Vector phrase;                // d loss / d p
};

inline ComposedInput compose_vectors(std::span<const Vector> context, const Vector& p, const AttentionParams& params,
                                     CompositionMode mode, CompositionTrace* trace = nullptr) {
  const auto d = p.size();
  ComposedInput out;
  if (trace) {
    trace->mode = mode;
    trace->context.assign(context.begin(), context.end());
    trace->phrase = p;
    trace->arg.clear();
  }
  if (mode == CompositionMode::kAp) {
    out.x = p;
    return out;
  }
  if (context.empty()) throw EmptyContextError("composition needs a non-empty context");
  for (const auto& e : context) {
    if (e.size() != d) throw DimensionMismatchError("context vector has wrong length");
  }
  Vector c(d);
  switch (mode) {
    case CompositionMode::kAttention: {
      Vector a = attention_weights(context, p, params);
      c.setZero();
      for (std::size_t i = 0; i < context.size(); ++i) c += a[static_cast<Eigen::Index>(i)] * context[i];
      if (trace) trace->weights = a;
      out.attention_weights = std::move(a);
      break;
    }
    case CompositionMode::kAvg:
      c.setZero();
      for (const auto& e : context) c += e;
      c /= static_cast<double>(context.size());
      break;
    case CompositionMode::kMin:
    case CompositionMode::kMax: {
      const bool is_min = mode == CompositionMode::kMin;
      std::vector<Eigen::Index> arg(static_cast<std::size_t>(d), 0);
      c = context[0];
      for (std::size_t i = 1; i < context.size(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) {
          const double v = context[i][k];
          if (is_min ? v < c[k] : v > c[k]) {
            c[k] = v;
            arg[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(i);
          }
        }
      }
      if (trace) trace->arg = std::move(arg);
      break;
    }
    case CompositionMode::kAp: break;
  }
  out.x.resize(2 * d);
  out.x << c, p;
  return out;
}

/// Gradient of a scalar loss w.r.t. W_a, the context vectors and p, given
/// d loss / d x.
inline CompositionGrad compose_backward(const CompositionTrace& trace, const AttentionParams& params,
                                        const Vector& dx) {
  const auto d = trace.phrase.size();
  const std::size_t n = trace.context.size();
  CompositionGrad g;
  g.context.assign(n, Vector::Zero(d));
  if (trace.mode == CompositionMode::kAp) {
    g.phrase = dx;
    return g;
  }
  const Vector dc = dx.head(d);
  g.phrase = dx.tail(d);
  switch (trace.mode) {
    case CompositionMode::kAttention: {
      // c = sum_i a_i e_i, a = softmax(s), s_i = w1.e_i + w2.p
      Vector da(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) da[static_cast<Eigen::Index>(i)] = dc.dot(trace.context[i]);
      const double mean = trace.weights.dot(da);
      const Vector ds = trace.weights.array() * (da.array() - mean);
      const auto w_ctx = params.w_a.head(d);
      const auto w_phr = params.w_a.tail(d);
      g.w_a = Vector::Zero(2 * d);
      double ds_sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a_i = trace.weights[static_cast<Eigen::Index>(i)];
        const double ds_i = ds[static_cast<Eigen::Index>(i)];
        g.context[i] = a_i * dc + ds_i * w_ctx;
        g.w_a.head(d) += ds_i * trace.context[i];
        ds_sum += ds_i;
      }
      g.w_a.tail(d) = ds_sum * trace.phrase;
      g.phrase += ds_sum * w_phr;
      break;
    }
    case CompositionMode::kAvg:
      for (auto& gi : g.context) gi = dc / static_cast<double>(n);
      break;
    case CompositionMode::kMin:
    case CompositionMode::kMax:
      for (Eigen::Index k = 0; k < d; ++k) g.context[static_cast<std::size_t>(trace.arg[static_cast<std::size_t>(k)])][k] += dc[k];
      break;
    case CompositionMode::kAp: break;
  }
  return g;
}

/// Context tokens resolved against a table. Under skip-token policy unknown
/// tokens are dropped, so `tokens` lists only the ones that got a vector.
struct ResolvedContext {
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;
};

inline ResolvedContext resolve_context(const std::vector<std::string>& tokens, const WordVectorTable& table) {
  ResolvedContext rc;
  rc.tokens.reserve(tokens.size());
  rc.vectors.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto v = table.lookup(t)) {
      rc.tokens.push_back(t);
      rc.vectors.push_back(std::move(*v));
    }
  }
  return rc;
}

inline ComposedInput compose(const AspectSample& sample, const WordVectorTable& table, const AttentionParams& params,
                             CompositionMode mode) {
  const Vector p = phrase_vector(sample.phrase, table);
  if (mode == CompositionMode::kAp) return compose_vectors({}, p, params, mode);
  if (sample.context_tokens.empty()) throw EmptyContextError("sample for '" + sample.phrase + "' has no context");
  const auto rc = resolve_context(sample.context_tokens, table);
  if (rc.vectors.empty()) throw EmptyContextError("every context token of '" + sample.phrase + "' is unknown");
  return compose_vectors(rc.vectors, p, params, mode);
}

/// Test-time sample: all sentences mentioning the phrase, concatenated in
/// corpus order.
inline AspectSample test_sample(const std::string& phrase, const AnnotatedCorpus& corpus) {
  AspectSample s;
  s.phrase = phrase;
  s.source = corpus.sentences_mentioning(phrase);
  for (auto id : s.source) {
    const auto& toks = corpus.sentences()[id].tokens;
    s.context_tokens.insert(s.context_tokens.end(), toks.begin(), toks.end());
  }
  return s;
}

inline ComposedInput compose_test_phrase(const std::string& phrase, const AnnotatedCorpus& corpus,
                                         const WordVectorTable& table, const AttentionParams& params,
                                         CompositionMode mode) {
  return compose(test_sample(phrase, corpus), table, params, mode);
}

}  // namespace metric_grouper
