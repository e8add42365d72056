#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metric_grouper/composition.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/random.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

enum class Activation { kTanh, kIdentity, kRelu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("activation must be tanh|identity|relu, got '" + std::string(s) + "'");
}

namespace detail {

inline Vector activate(Activation a, const Vector& z) {
  switch (a) {
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kIdentity: return z;
    case Activation::kRelu: return z.cwiseMax(0.0);
  }
  return z;
}

// f'(z) expressed through the output h = f(z).
inline Vector activation_slope(Activation a, const Vector& h) {
  switch (a) {
    case Activation::kTanh: return (1.0 - h.array().square()).matrix();
    case Activation::kIdentity: return Vector::Ones(h.size());
    case Activation::kRelu: return (h.array() > 0.0).cast<double>().matrix();
  }
  return Vector::Ones(h.size());
}

}  // namespace detail

struct Layer {
  Matrix W;  // out x in
  Vector b;  // out
};

/// Siamese branch g(x): M fully connected layers h = f(W h_prev + b), plus
/// the attention vector used to build x.
struct MetricNetwork {
  std::vector<Layer> layers;
  Activation activation = Activation::kTanh;
  double dropout_rate = 0.0;
  AttentionParams attention;
  CompositionMode mode = CompositionMode::kAttention;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }

  void validate() const {
    if (layers.empty()) throw PreconditionError("network has no layers");
    for (std::size_t m = 0; m < layers.size(); ++m) {
      if (layers[m].b.size() != layers[m].W.rows()) throw DimensionMismatchError("bias length != rows of W");
      if (m > 0 && layers[m].W.cols() != layers[m - 1].W.rows()) {
        throw DimensionMismatchError("layer " + std::to_string(m) + " input does not match previous output");
      }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.W.allFinite() || !l.b.allFinite()) return false;
    }
    return attention.w_a.allFinite();
  }

  /// Sum of squared Frobenius norms of every W and b.
  double squared_norm() const {
    double s = 0;
    for (const auto& l : layers) s += l.W.squaredNorm() + l.b.squaredNorm();
    return s;
  }
};

/// Widths interpolated geometrically from input to output, e.g. 400 -> 200 -> 100 -> 50.
inline std::vector<int> default_widths(int input_dim, int output_dim, int layers) {
  if (layers < 1) throw ConfigError("network needs at least one layer");
  std::vector<int> widths;
  for (int m = 1; m < layers; ++m) {
    const double w = input_dim * std::pow(static_cast<double>(output_dim) / input_dim, static_cast<double>(m) / layers);
    widths.push_back(std::max(1, static_cast<int>(std::lround(w))));
  }
  widths.push_back(output_dim);
  return widths;
}

/// Glorot-uniform weights, zero biases, zero attention vector.
inline MetricNetwork make_network(int input_dim, const std::vector<int>& widths, Activation activation,
                                  double dropout_rate, int word_dim, CompositionMode mode, Rng& rng) {
  if (input_dim <= 0 || widths.empty()) throw ConfigError("invalid network shape");
  MetricNetwork net;
  net.activation = activation;
  net.dropout_rate = dropout_rate;
  net.mode = mode;
  net.attention = AttentionParams::zeros(word_dim);
  int fan_in = input_dim;
  for (int width : widths) {
    if (width <= 0) throw ConfigError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / (fan_in + width));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer l{Matrix(width, fan_in), Vector::Zero(width)};
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.W.rows(); ++r) l.W(r, c) = dist(rng);
    }
    net.layers.push_back(std::move(l));
    fan_in = width;
  }
  net.validate();
  return net;
}

/// Architecture knobs. Empty `hidden` means geometric interpolation.
struct NetworkShape {
  int layers = 3;
  int output_dim = 50;
  std::vector<int> hidden;
  Activation activation = Activation::kTanh;
  double dropout_rate = 0.5;

  std::vector<int> widths(int input_dim) const {
    if (hidden.empty()) return default_widths(input_dim, output_dim, layers);
    if (static_cast<int>(hidden.size()) != layers - 1) {
      throw ConfigError("hidden lists " + std::to_string(hidden.size()) + " widths but layers = " +
                        std::to_string(layers));
    }
    auto w = hidden;
    w.push_back(output_dim);
    return w;
  }
};

inline MetricNetwork make_network(const NetworkShape& shape, CompositionMode mode, int word_dim, std::uint64_t seed) {
  Rng rng(seed);
  const int in = composed_dim(mode, word_dim);
  return make_network(in, shape.widths(in), shape.activation, shape.dropout_rate, word_dim, mode, rng);
}

/// Activations kept for backprop. `inputs[m]` is what layer m consumed
/// (post-dropout), `outputs[m]` is f(z) before dropout, `masks[m]` is the
/// scaled keep-mask (empty when no dropout was applied).
struct ForwardCache {
  std::vector<Vector> inputs;
  std::vector<Vector> outputs;
  std::vector<Vector> masks;

  const Vector& result() const { return outputs.back(); }
};

/// Forward pass. Passing a generator selects train mode: inverted dropout
/// on hidden outputs. Without one (eval mode) nothing is dropped or scaled.
inline ForwardCache forward(const MetricNetwork& net, const Vector& x, Rng* dropout_rng = nullptr) {
  if (x.size() != net.input_dim()) {
    throw DimensionMismatchError("input has length " + std::to_string(x.size()) + ", network expects " +
                                 std::to_string(net.input_dim()));
  }
  const std::size_t depth = net.layers.size();
  const bool drop = dropout_rng != nullptr && net.dropout_rate > 0.0;
  ForwardCache cache;
  cache.inputs.reserve(depth);
  cache.outputs.reserve(depth);
  cache.masks.resize(depth);
  Vector h = x;
  for (std::size_t m = 0; m < depth; ++m) {
    const auto& l = net.layers[m];
    cache.inputs.push_back(h);
    Vector out = detail::activate(net.activation, l.W * h + l.b);
    h = out;
    if (drop && m + 1 < depth) {
      std::bernoulli_distribution keep(1.0 - net.dropout_rate);
      Vector mask(out.size());
      const double scale = 1.0 / (1.0 - net.dropout_rate);
      for (Eigen::Index k = 0; k < mask.size(); ++k) mask[k] = keep(*dropout_rng) ? scale : 0.0;
      h = out.cwiseProduct(mask);
      cache.masks[m] = std::move(mask);
    }
    cache.outputs.push_back(std::move(out));
  }
  return cache;
}

/// g(x) in eval mode.
inline Vector embed(const MetricNetwork& net, const Vector& x) { return forward(net, x).result(); }

/// ||g(x_i) - g(x_j)||^2, eval mode.
inline double distance_sq(const MetricNetwork& net, const Vector& xi, const Vector& xj) {
  return (embed(net, xi) - embed(net, xj)).squaredNorm();
}

struct TrainConfig {
  double margin_t = 3.0;   // t; positives pushed below t-1, negatives above t+1
  double beta = 2.0;       // softplus sharpness
  double lambda = 0.002;   // L2 on MLP weights and biases
  double learning_rate = 0.03;
  int epochs = 20;
  std::uint64_t seed = 42;
  bool finetune_attention = true;
  bool finetune_embeddings = false;
  int early_stop_patience = 0;  // 0 disables; needs a dev scorer

  void validate() const {
    if (!(margin_t > 1.0)) throw ConfigError("margin-t must exceed 1");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning-rate must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (early_stop_patience < 0) throw ConfigError("early-stop-patience must be non-negative");
  }
};

/// Generalized logistic loss (1/beta) log(1 + exp(beta w)), overflow-safe.
inline double softplus(double omega, double beta) {
  const double z = beta * omega;
  // omega + ... rather than (z + ...) / beta: the division can round below omega.
  if (z > 0) return omega + std::log1p(std::exp(-z)) / beta;
  return std::log1p(std::exp(z)) / beta;
}

/// d softplus / d omega = logistic(beta omega).
inline double softplus_slope(double omega, double beta) {
  const double z = beta * omega;
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct PairLoss {
  double loss = 0;   // sigma(omega) / 2
  double omega = 0;  // 1 - l (t - d^2)
  double distance_sq = 0;
};

inline PairLoss loss_from_distance(double d2, int label, const TrainConfig& cfg) {
  if (label != 1 && label != -1) throw PreconditionError("pair label must be +1 or -1");
  const double omega = 1.0 - label * (cfg.margin_t - d2);
  return {0.5 * softplus(omega, cfg.beta), omega, d2};
}

/// Per-pair term of the objective, before regularization.
inline PairLoss pair_loss(const MetricNetwork& net, const Vector& xi, const Vector& xj, int label,
                          const TrainConfig& cfg) {
  return loss_from_distance(distance_sq(net, xi, xj), label, cfg);
}

/// A pair already mapped to network inputs.
struct ComposedPair {
  Vector xi;
  Vector xj;
  int label = 1;
};

inline double regularizer(const MetricNetwork& net, const TrainConfig& cfg) {
  return 0.5 * cfg.lambda * net.squared_norm();
}

/// Sum of pair losses plus (lambda/2) sum_m (||W||_F^2 + ||b||^2).
inline double objective(const MetricNetwork& net, std::span<const ComposedPair> pairs, const TrainConfig& cfg) {
  if (pairs.empty()) throw PreconditionError("objective over an empty batch");
  double total = 0;
  for (const auto& p : pairs) total += pair_loss(net, p.xi, p.xj, p.label, cfg).loss;
  return total + regularizer(net, cfg);
}

/// Parameter gradients with the same shapes as the network.
struct NetworkGrad {
  std::vector<Matrix> W;
  std::vector<Vector> b;

  static NetworkGrad zeros_like(const MetricNetwork& net) {
    NetworkGrad g;
    for (const auto& l : net.layers) {
      g.W.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
      g.b.push_back(Vector::Zero(l.b.size()));
    }
    return g;
  }

  double max_abs() const {
    double m = 0;
    for (const auto& w : W) m = std::max(m, w.cwiseAbs().maxCoeff());
    for (const auto& v : b) m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
  }
};

/// Backprop one branch from d loss / d h_M, accumulating into `grad`.
/// Returns d loss / d x.
inline Vector backward(const MetricNetwork& net, const ForwardCache& cache, const Vector& d_out, NetworkGrad& grad) {
  Vector delta = d_out;
  for (std::size_t m = net.layers.size(); m-- > 0;) {
    if (cache.masks[m].size() > 0) delta = delta.cwiseProduct(cache.masks[m]);
    const Vector dz = delta.cwiseProduct(detail::activation_slope(net.activation, cache.outputs[m]));
    grad.W[m].noalias() += dz * cache.inputs[m].transpose();
    grad.b[m] += dz;
    delta = net.layers[m].W.transpose() * dz;
  }
  return delta;
}

struct PairGradient {
  PairLoss loss;
  NetworkGrad net;
  Vector dxi;
  Vector dxj;
};

/// Exact gradient of sigma(omega)/2 (+ the regularizer when requested)
/// through both weight-sharing branches. With a generator, each branch
/// draws its own dropout mask (left first).
inline PairGradient pair_gradients(const MetricNetwork& net, const Vector& xi, const Vector& xj, int label,
                                   const TrainConfig& cfg, bool include_regularizer = true,
                                   Rng* dropout_rng = nullptr) {
  const ForwardCache ci = forward(net, xi, dropout_rng);
  const ForwardCache cj = forward(net, xj, dropout_rng);
  const Vector diff = ci.result() - cj.result();
  PairGradient out;
  out.loss = loss_from_distance(diff.squaredNorm(), label, cfg);
  out.net = NetworkGrad::zeros_like(net);
  // dL/dd2 = 0.5 * sigma'(omega) * l
  const double dd2 = 0.5 * softplus_slope(out.loss.omega, cfg.beta) * label;
  const Vector g = (2.0 * dd2) * diff;
  out.dxi = backward(net, ci, g, out.net);
  out.dxj = backward(net, cj, -g, out.net);
  if (include_regularizer && cfg.lambda > 0) {
    for (std::size_t m = 0; m < net.layers.size(); ++m) {
      out.net.W[m] += cfg.lambda * net.layers[m].W;
      out.net.b[m] += cfg.lambda * net.layers[m].b;
    }
  }
  return out;
}

}  // namespace metric_grouper
