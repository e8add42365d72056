#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/corpus.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/lexicon.hpp"
#include "metric_grouper/random.hpp"

namespace metric_grouper {

/// One aspect phrase with one context. Carries no gold label.
struct AspectSample {
  std::string phrase;
  std::vector<std::string> context_tokens;
  std::vector<std::size_t> source;  // sentence ids, in context order

  friend bool operator==(const AspectSample&, const AspectSample&) = default;
};

struct SamplePair {
  AspectSample left;
  AspectSample right;
  int label = 1;  // +1 same phrase, -1 incompatible phrases

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// One sample per (phrase, mentioning sentence), in corpus order. A phrase
/// mentioned twice in the same sentence yields a single sample.
inline std::vector<AspectSample> generate_samples(const AnnotatedCorpus& corpus) {
  std::vector<AspectSample> out;
  const auto& sentences = corpus.sentences();
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    std::set<std::string> seen;
    for (const auto& m : sentences[s].mentions) {
      if (!seen.insert(m.phrase).second) continue;
      out.push_back({m.phrase, sentences[s].tokens, {s}});
    }
  }
  return out;
}

struct PairOptions {
  double eta = 0.3;
  std::uint64_t seed = 42;
  std::optional<std::size_t> max_pos;
  bool allow_replacement = false;  // negatives may repeat when the pool is too small
  JcnOptions jcn;
};

struct PairStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t positive_candidates = 0;
  std::size_t negative_pool = 0;
  bool negatives_with_replacement = false;
};

/// Distant-supervision pairs: every same-phrase sample pair is positive,
/// and an equal number of lexicon-incompatible pairs is drawn as negatives.
inline std::vector<SamplePair> generate_pairs(const std::vector<AspectSample>& samples, const Taxonomy& tax,
                                              const PairOptions& opt, PairStats* stats = nullptr) {
  if (samples.size() < 2) throw PreconditionError("pair generation needs at least two samples");
  Rng rng(opt.seed);

  std::map<std::string, std::vector<std::size_t>> by_phrase;
  for (std::size_t i = 0; i < samples.size(); ++i) by_phrase[samples[i].phrase].push_back(i);

  std::vector<std::pair<std::size_t, std::size_t>> positives;
  for (const auto& [_, members] : by_phrase) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) positives.emplace_back(members[a], members[b]);
    }
  }
  const std::size_t candidates = positives.size();
  if (opt.max_pos && positives.size() > *opt.max_pos) {
    auto keep = sample_without_replacement(positives.size(), *opt.max_pos, rng);
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    kept.reserve(keep.size());
    for (auto k : keep) kept.push_back(positives[k]);
    positives = std::move(kept);
  }
  if (positives.empty()) throw PreconditionError("no positive pairs: every phrase has a single sample");

  // Eligible negatives, grouped into blocks of incompatible phrase pairs.
  struct Block {
    const std::vector<std::size_t>* left;
    const std::vector<std::size_t>* right;
    std::uint64_t offset;
  };
  std::vector<Block> blocks;
  std::uint64_t pool = 0;
  for (auto a = by_phrase.begin(); a != by_phrase.end(); ++a) {
    for (auto b = std::next(a); b != by_phrase.end(); ++b) {
      if (!incompatible(a->first, b->first, tax, opt.eta, opt.jcn)) continue;
      blocks.push_back({&a->second, &b->second, pool});
      pool += static_cast<std::uint64_t>(a->second.size()) * b->second.size();
    }
  }
  const std::size_t need = positives.size();
  std::vector<std::uint64_t> picks;
  bool with_replacement = false;
  if (pool >= need) {
    picks = sample_without_replacement(pool, need, rng);
  } else if (opt.allow_replacement && pool > 0) {
    with_replacement = true;
    std::uniform_int_distribution<std::uint64_t> dist(0, pool - 1);
    for (std::size_t i = 0; i < need; ++i) picks.push_back(dist(rng));
    std::sort(picks.begin(), picks.end());
  } else {
    throw InsufficientNegativesError(need, static_cast<std::size_t>(pool));
  }

  std::vector<std::pair<std::size_t, std::size_t>> negatives;
  negatives.reserve(need);
  for (auto k : picks) {
    auto it = std::upper_bound(blocks.begin(), blocks.end(), k,
                               [](std::uint64_t v, const Block& b) { return v < b.offset; });
    const Block& blk = *std::prev(it);
    const auto local = k - blk.offset;
    const auto width = blk.right->size();
    negatives.emplace_back((*blk.left)[local / width], (*blk.right)[local % width]);
  }

  std::vector<SamplePair> out;
  out.reserve(positives.size() + negatives.size());
  for (auto [i, j] : positives) out.push_back({samples[i], samples[j], +1});
  for (auto [i, j] : negatives) out.push_back({samples[i], samples[j], -1});
  std::shuffle(out.begin(), out.end(), rng);

  if (stats) {
    *stats = {positives.size(), negatives.size(), candidates, static_cast<std::size_t>(pool), with_replacement};
  }
  return out;
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json to_json(const AspectSample& s) {
  return {{"phrase", s.phrase}, {"tokens", s.context_tokens}, {"source", s.source}};
}

inline AspectSample sample_from_json(const nlohmann::json& j) {
  AspectSample s;
  s.phrase = j.at("phrase").get<std::string>();
  s.context_tokens = j.at("tokens").get<std::vector<std::string>>();
  s.source = j.at("source").get<std::vector<std::size_t>>();
  if (s.context_tokens.empty()) throw FormatError("sample has empty context");
  return s;
}

/// Header line followed by one `{"left", "right", "label"}` record per pair.
inline std::string serialize_pairs(const std::vector<SamplePair>& pairs, const std::string& config_hash) {
  std::string out = nlohmann::json{{"format", "metric_grouper.pairs"}, {"version", 1}, {"config_hash", config_hash}}
                        .dump();
  out += '\n';
  for (const auto& p : pairs) {
    out += nlohmann::json{{"left", to_json(p.left)}, {"right", to_json(p.right)}, {"label", p.label}}.dump();
    out += '\n';
  }
  return out;
}

struct PairFile {
  std::string config_hash;
  std::vector<SamplePair> pairs;
};

inline PairFile parse_pairs(std::istream& in) {
  PairFile file;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::split_ws(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!header) {
        if (j.value("format", "") != "metric_grouper.pairs") throw FormatError("missing pairs header");
        file.config_hash = j.at("config_hash").get<std::string>();
        header = true;
        continue;
      }
      SamplePair p{sample_from_json(j.at("left")), sample_from_json(j.at("right")), j.at("label").get<int>()};
      if (p.label != 1 && p.label != -1) throw FormatError("label must be +1 or -1");
      file.pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid pair record: ") + e.what(), lineno);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  if (!header) throw FormatError("empty pairs file");
  return file;
}

inline PairFile load_pairs(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_pairs(in);
}

}  // namespace metric_grouper
