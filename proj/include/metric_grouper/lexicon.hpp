#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/errors.hpp"
#include "metric_grouper/text.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

struct JcnOptions {
  double cap = 1e6;
  double epsilon = 1e-12;
};

/// Concept DAG with frequency counts, used for information-content
/// similarity. Concept ids are strings; "smallest id" means lexicographic.
class Taxonomy {
 public:
  struct ConceptRecord {
    std::string id;
    std::vector<std::string> parents;
    double count = 0;
  };

  Taxonomy(std::vector<ConceptRecord> concepts,
           std::map<std::string, std::vector<std::string>> word_map) {
    build(std::move(concepts), std::move(word_map));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t word_count() const noexcept { return word_map_.size(); }
  const std::string& root() const { return ids_[root_]; }
  double total() const noexcept { return propagated_[root_]; }
  bool has_concept(const std::string& id) const { return index_.count(id) > 0; }

  double propagated_count(const std::string& id) const { return propagated_[index_of(id)]; }

  /// Ancestors of `id` including itself, sorted by id.
  std::vector<std::string> ancestors(const std::string& id) const {
    std::vector<std::string> out;
    for (int a : ancestors_[index_of(id)]) out.push_back(ids_[a]);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::string> parents(const std::string& id) const {
    std::vector<std::string> out;
    for (int p : parents_[index_of(id)]) out.push_back(ids_[p]);
    return out;
  }

  const std::vector<std::string>& concept_ids() const noexcept { return ids_; }

  /// Concepts for a single (lowercased) token; empty when unmapped.
  const std::vector<std::string>& concepts_for_word(const std::string& token) const {
    static const std::vector<std::string> kNone;
    auto it = word_map_.find(token);
    return it == word_map_.end() ? kNone : it->second;
  }

  /// -ln(propagated count / total).
  double information_content(const std::string& id) const {
    const double count = propagated_[index_of(id)];
    if (!(count > 0)) throw ZeroProbabilityError("concept '" + id + "' has zero probability");
    return -std::log(count / total());
  }

  /// Common ancestor with maximal IC; ties go to the smallest id.
  /// Zero-count ancestors rank as infinitely specific.
  std::string lcs(const std::string& a, const std::string& b) const {
    const auto& anc_a = ancestors_[index_of(a)];
    const auto& anc_b = ancestors_[index_of(b)];
    std::optional<int> best;
    double best_ic = -1;
    for (int c : anc_a) {
      if (!std::binary_search(anc_b.begin(), anc_b.end(), c)) continue;
      const double ic = ic_or_inf(c);
      if (!best || ic > best_ic || (ic == best_ic && ids_[c] < ids_[*best])) {
        best = c;
        best_ic = ic;
      }
    }
    // Unreachable with a single root: every pair shares it.
    if (!best) throw UnknownConceptError("no common ancestor for '" + a + "' and '" + b + "'");
    return ids_[*best];
  }

  /// Jcn between two concepts: 1 / (IC(a) + IC(b) - 2 IC(lcs)), capped.
  /// Zero-probability concepts have infinite IC, giving similarity 0.
  double concept_jcn(const std::string& a, const std::string& b, const JcnOptions& opt = {}) const {
    const double ic_a = ic_or_inf(index_of(a));
    const double ic_b = ic_or_inf(index_of(b));
    if (std::isinf(ic_a) || std::isinf(ic_b)) return a == b ? opt.cap : 0.0;
    const double res = information_content(lcs(a, b));
    const double denom = ic_a + ic_b - 2.0 * res;
    if (denom <= opt.epsilon) return opt.cap;
    return std::min(opt.cap, 1.0 / denom);
  }

 private:
  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownConceptError("unknown concept '" + id + "'");
    return it->second;
  }

  double ic_or_inf(int c) const {
    return propagated_[c] > 0 ? -std::log(propagated_[c] / total())
                              : std::numeric_limits<double>::infinity();
  }

  void build(std::vector<ConceptRecord> concepts, std::map<std::string, std::vector<std::string>> word_map) {
    if (concepts.empty()) throw EmptyError("taxonomy has no concepts");
    for (auto& c : concepts) {
      if (index_.count(c.id)) throw FormatError("duplicate concept '" + c.id + "'");
      if (!(c.count >= 0) || !std::isfinite(c.count)) {
        throw FormatError("concept '" + c.id + "' has invalid count");
      }
      index_[c.id] = static_cast<int>(ids_.size());
      ids_.push_back(c.id);
    }
    const int n = static_cast<int>(ids_.size());
    parents_.resize(n);
    std::vector<int> roots;
    for (int i = 0; i < n; ++i) {
      for (const auto& p : concepts[i].parents) {
        auto it = index_.find(p);
        if (it == index_.end()) throw FormatError("concept '" + ids_[i] + "' has unknown parent '" + p + "'");
        if (std::find(parents_[i].begin(), parents_[i].end(), it->second) == parents_[i].end()) {
          parents_[i].push_back(it->second);
        }
      }
      if (parents_[i].empty()) roots.push_back(i);
    }
    if (roots.size() != 1) {
      throw FormatError("taxonomy must have exactly one root, found " + std::to_string(roots.size()));
    }
    root_ = roots.front();

    // Ancestor closure by DFS with cycle detection.
    ancestors_.assign(n, {});
    std::vector<int> state(n, 0);  // 0 new, 1 in progress, 2 done
    auto visit = [&](auto&& self, int c) -> void {
      if (state[c] == 2) return;
      if (state[c] == 1) throw FormatError("cycle in taxonomy through '" + ids_[c] + "'");
      state[c] = 1;
      std::vector<int> acc{c};
      for (int p : parents_[c]) {
        self(self, p);
        acc.insert(acc.end(), ancestors_[p].begin(), ancestors_[p].end());
      }
      std::sort(acc.begin(), acc.end());
      acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
      ancestors_[c] = std::move(acc);
      state[c] = 2;
    };
    for (int i = 0; i < n; ++i) visit(visit, i);

    // Each concept's own count is added once to every ancestor (DAG-safe).
    propagated_.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int a : ancestors_[i]) propagated_[a] += concepts[i].count;
    }
    if (!(propagated_[root_] > 0)) throw FormatError("taxonomy total count must be positive");

    for (auto& [word, ids] : word_map) {
      for (const auto& id : ids) {
        if (!index_.count(id)) throw FormatError("word '" + word + "' maps to unknown concept '" + id + "'");
      }
      auto& dst = word_map_[text::lower(word)];
      for (auto& id : ids) {
        if (std::find(dst.begin(), dst.end(), id) == dst.end()) dst.push_back(std::move(id));
      }
    }
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> ancestors_;  // sorted, includes self
  std::vector<double> propagated_;
  std::unordered_map<std::string, std::vector<std::string>> word_map_;
  int root_ = 0;
};

namespace detail {

inline std::string concept_id(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw FormatError("concept id must be a string or integer");
}

inline Taxonomy parse_taxonomy(std::istream& in, LoadIssues* issues) {
  std::vector<Taxonomy::ConceptRecord> concepts;
  std::map<std::string, std::vector<std::string>> words;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::split_ws(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw FormatError("record is not a JSON object");
      if (j.contains("concept")) {
        Taxonomy::ConceptRecord c;
        c.id = concept_id(j["concept"]);
        if (j.contains("parents")) {
          if (!j["parents"].is_array()) throw FormatError("'parents' must be an array");
          for (const auto& p : j["parents"]) c.parents.push_back(concept_id(p));
        }
        if (j.contains("count")) {
          if (!j["count"].is_number()) throw FormatError("'count' must be a number");
          c.count = j["count"].get<double>();
        }
        concepts.push_back(std::move(c));
      } else if (j.contains("word")) {
        if (!j["word"].is_string() || !j.contains("concepts") || !j["concepts"].is_array()) {
          throw FormatError("word record needs a string 'word' and a 'concepts' array");
        }
        auto& dst = words[text::lower(j["word"].get<std::string>())];
        for (const auto& c : j["concepts"]) dst.push_back(concept_id(c));
      } else {
        throw FormatError("record is neither a concept nor a word");
      }
    } catch (const nlohmann::json::exception& e) {
      if (!issues) throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
      issues->errors.emplace_back(std::string("invalid JSON: ") + e.what(), lineno);
    } catch (const FormatError& e) {
      if (!issues) throw FormatError(e.what(), lineno);
      issues->errors.emplace_back(e.what(), lineno);
    }
  }
  return Taxonomy(std::move(concepts), std::move(words));
}

}  // namespace detail

inline Taxonomy load_taxonomy(const std::string& path) {
  auto in = detail::open_input(path);
  return detail::parse_taxonomy(in, nullptr);
}

/// Collects per-line format errors instead of stopping at the first one.
inline Taxonomy scan_taxonomy(const std::string& path, LoadIssues& issues) {
  auto in = detail::open_input(path);
  return detail::parse_taxonomy(in, &issues);
}

inline Taxonomy parse_taxonomy(const std::string& contents) {
  std::istringstream in(contents);
  return detail::parse_taxonomy(in, nullptr);
}

inline double information_content(const std::string& concept_id, const Taxonomy& tax) {
  return tax.information_content(concept_id);
}

inline std::string lcs(const std::string& a, const std::string& b, const Taxonomy& tax) { return tax.lcs(a, b); }

/// Concepts for a phrase: its head (last) token, else the nearest
/// constituent to the right that has a mapping.
inline const std::vector<std::string>& phrase_concepts(std::string_view phrase, const Taxonomy& tax) {
  const auto tokens = text::split_ws(text::lower(phrase));
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    const auto& cs = tax.concepts_for_word(*it);
    if (!cs.empty()) return cs;
  }
  throw UnknownWordError("no concept mapping for '" + std::string(phrase) + "'");
}

/// Maximum Jcn over the concept pairs of the two phrases.
inline double jcn_similarity(std::string_view a, std::string_view b, const Taxonomy& tax,
                             const JcnOptions& opt = {}) {
  const auto& ca = phrase_concepts(a, tax);
  const auto& cb = phrase_concepts(b, tax);
  double best = 0;
  for (const auto& x : ca) {
    for (const auto& y : cb) best = std::max(best, tax.concept_jcn(x, y, opt));
  }
  return best;
}

/// True iff the phrases' similarity is known and below `eta`.
inline bool incompatible(std::string_view a, std::string_view b, const Taxonomy& tax, double eta,
                         const JcnOptions& opt = {}) {
  if (!(eta > 0)) throw PreconditionError("eta must be positive");
  try {
    return jcn_similarity(a, b, tax, opt) < eta;
  } catch (const UnknownWordError&) {
    return false;
  }
}

}  // namespace metric_grouper
