#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/errors.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/trainer.hpp"

namespace metric_grouper {

inline constexpr int kCheckpointVersion = 1;

/// A trained network plus what is needed to reuse it.
struct Checkpoint {
  MetricNetwork net;
  int word_dim = 0;
  std::string config_hash;
  std::map<std::string, Vector> embeddings;  // tuned word vectors, if any
  std::vector<EpochStats> history;
};

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace detail

/// JSON model container. Doubles are written in shortest round-trip form,
/// so save/load reproduces every parameter bit for bit.
inline nlohmann::json to_json(const Checkpoint& ck) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : ck.net.layers) {
    // W stored row-major.
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.W.size()));
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.push_back(l.W(r, c));
    }
    layers.push_back({{"rows", l.W.rows()}, {"cols", l.W.cols()}, {"W", w}, {"b", detail::vector_json(l.b)}});
  }
  nlohmann::json emb = nlohmann::json::object();
  for (const auto& [token, v] : ck.embeddings) emb[token] = detail::vector_json(v);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : ck.history) {
    nlohmann::json e = {{"epoch", h.epoch}, {"mean_objective", h.mean_objective}, {"mean_train_loss", h.mean_train_loss}};
    if (h.dev_score) e["dev_score"] = *h.dev_score;
    hist.push_back(std::move(e));
  }
  return {{"format", "metric_grouper.model"},
          {"version", kCheckpointVersion},
          {"config_hash", ck.config_hash},
          {"mode", to_string(ck.net.mode)},
          {"activation", to_string(ck.net.activation)},
          {"dropout_rate", ck.net.dropout_rate},
          {"word_dim", ck.word_dim},
          {"input_dim", ck.net.input_dim()},
          {"output_dim", ck.net.output_dim()},
          {"layers", std::move(layers)},
          {"w_a", detail::vector_json(ck.net.attention.w_a)},
          {"embeddings", std::move(emb)},
          {"history", std::move(hist)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "metric_grouper.model") throw FormatError("not a model file");
    if (j.at("version").get<int>() != kCheckpointVersion) throw FormatError("unsupported model version");
    Checkpoint ck;
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.word_dim = j.at("word_dim").get<int>();
    ck.net.mode = parse_composition_mode(j.at("mode").get<std::string>());
    ck.net.activation = parse_activation(j.at("activation").get<std::string>());
    ck.net.dropout_rate = j.at("dropout_rate").get<double>();
    for (const auto& jl : j.at("layers")) {
      const auto rows = jl.at("rows").get<Eigen::Index>();
      const auto cols = jl.at("cols").get<Eigen::Index>();
      const auto w = jl.at("W").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw FormatError("layer W has wrong size");
      Layer l{Matrix(rows, cols), detail::vector_from_json(jl.at("b"))};
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) l.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      ck.net.layers.push_back(std::move(l));
    }
    ck.net.attention.w_a = detail::vector_from_json(j.at("w_a"));
    if (ck.net.attention.w_a.size() != 2 * ck.word_dim) throw FormatError("w_a length does not match word_dim");
    for (const auto& [token, v] : j.at("embeddings").items()) ck.embeddings[token] = detail::vector_from_json(v);
    for (const auto& h : j.at("history")) {
      EpochStats e;
      e.epoch = h.at("epoch").get<int>();
      e.mean_objective = h.at("mean_objective").get<double>();
      e.mean_train_loss = h.at("mean_train_loss").get<double>();
      if (h.contains("dev_score")) e.dev_score = h["dev_score"].get<double>();
      ck.history.push_back(e);
    }
    ck.net.validate();
    if (ck.net.input_dim() != composed_dim(ck.net.mode, ck.word_dim)) {
      throw FormatError("input_dim does not match mode and word_dim");
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline std::string serialize_checkpoint(const Checkpoint& ck) { return to_json(ck).dump(1) + "\n"; }

inline Checkpoint parse_checkpoint(const std::string& contents) {
  try {
    return checkpoint_from_json(nlohmann::json::parse(contents));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace metric_grouper
