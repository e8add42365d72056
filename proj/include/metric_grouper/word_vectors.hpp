#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "metric_grouper/errors.hpp"
#include "metric_grouper/text.hpp"

namespace metric_grouper {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class UnknownPolicy { kZeroVector, kSkipToken };

inline std::string to_string(UnknownPolicy p) {
  return p == UnknownPolicy::kZeroVector ? "zero-vector" : "skip-token";
}

inline UnknownPolicy parse_unknown_policy(std::string_view s) {
  if (s == "zero-vector" || s == "zero") return UnknownPolicy::kZeroVector;
  if (s == "skip-token" || s == "skip") return UnknownPolicy::kSkipToken;
  throw ConfigError("unknown-policy must be zero-vector or skip-token, got '" + std::string(s) + "'");
}

/// Collects recoverable problems found while loading, for reporting.
struct LoadIssues {
  std::vector<FormatError> errors;
  std::vector<std::string> warnings;

  bool clean() const { return errors.empty(); }
};

/// Token -> dense vector lookup. Tokens are stored lowercased.
class WordVectorTable {
 public:
  WordVectorTable() = default;
  WordVectorTable(int dimension, UnknownPolicy policy) : dimension_(dimension), policy_(policy) {
    if (dimension <= 0) throw FormatError("word vector dimension must be positive");
  }

  int dimension() const noexcept { return dimension_; }
  UnknownPolicy unknown_policy() const noexcept { return policy_; }
  void set_unknown_policy(UnknownPolicy p) noexcept { policy_ = p; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& token) const { return entries_.count(token) > 0; }

  /// Returns false (and leaves the table unchanged) if the token exists.
  bool insert(const std::string& token, Vector v) {
    if (v.size() != dimension_) {
      throw DimensionMismatchError("vector for '" + token + "' has length " +
                                   std::to_string(v.size()) + ", expected " +
                                   std::to_string(dimension_));
    }
    if (!v.allFinite()) throw FormatError("non-finite component in vector for '" + token + "'");
    return entries_.emplace(token, std::move(v)).second;
  }

  /// nullptr when the token is unknown.
  const Vector* find(const std::string& token) const {
    auto it = entries_.find(token);
    return it == entries_.end() ? nullptr : &it->second;
  }

  Vector* find_mutable(const std::string& token) {
    auto it = entries_.find(token);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Vector for `token` under the unknown policy; nullopt means "skip".
  std::optional<Vector> lookup(const std::string& token) const {
    if (const Vector* v = find(token)) return *v;
    if (policy_ == UnknownPolicy::kZeroVector) return Vector::Zero(dimension_);
    return std::nullopt;
  }

  /// Copy of this table with `overrides` replacing (or adding) entries.
  WordVectorTable with_overrides(const std::map<std::string, Vector>& overrides) const {
    WordVectorTable out = *this;
    for (const auto& [token, v] : overrides) {
      if (v.size() != dimension_) throw DimensionMismatchError("override for '" + token + "' has wrong length");
      out.entries_[token] = v;
    }
    return out;
  }

  const std::unordered_map<std::string, Vector>& entries() const noexcept { return entries_; }

 private:
  int dimension_ = 0;
  UnknownPolicy policy_ = UnknownPolicy::kZeroVector;
  std::unordered_map<std::string, Vector> entries_;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// Parses `token f1 ... fd` lines. With `issues == nullptr` the first problem
// throws; otherwise bad lines are recorded and skipped.
inline WordVectorTable parse_word_vectors(std::istream& in, UnknownPolicy policy, LoadIssues* issues) {
  auto fail = [&](const std::string& msg, std::size_t line) {
    if (!issues) throw FormatError(msg, line);
    issues->errors.emplace_back(msg, line);
  };

  WordVectorTable table;
  std::string line;
  std::size_t lineno = 0;
  std::size_t duplicates = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      fail("expected a token followed by at least one component", lineno);
      continue;
    }
    const int arity = static_cast<int>(fields.size()) - 1;
    if (table.dimension() == 0) {
      table = WordVectorTable(arity, policy);
    } else if (arity != table.dimension()) {
      fail("inconsistent dimension: " + std::to_string(arity) + " components, expected " +
               std::to_string(table.dimension()),
           lineno);
      continue;
    }
    Vector v(arity);
    bool ok = true;
    for (int k = 0; k < arity; ++k) {
      double x = 0;
      if (!parse_double(fields[k + 1], x)) {
        fail("non-numeric field '" + fields[k + 1] + "'", lineno);
        ok = false;
        break;
      }
      if (!std::isfinite(x)) {
        fail("non-finite field '" + fields[k + 1] + "'", lineno);
        ok = false;
        break;
      }
      v[k] = x;
    }
    if (!ok) continue;
    if (!table.insert(text::lower(fields[0]), std::move(v))) ++duplicates;
  }
  if (issues && duplicates > 0) {
    issues->warnings.push_back(std::to_string(duplicates) +
                               " duplicate tokens (after lowercasing) ignored; first occurrence kept");
  }
  if (table.size() == 0) {
    if (!issues) throw EmptyError("no word vectors loaded");
    issues->errors.emplace_back("no word vectors loaded");
  }
  return table;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

/// Loads a whitespace-separated text embedding file (GloVe layout).
/// Dimension is taken from the first non-empty line.
inline WordVectorTable load_word_vectors(const std::string& path,
                                         UnknownPolicy policy = UnknownPolicy::kZeroVector) {
  auto in = detail::open_input(path);
  return detail::parse_word_vectors(in, policy, nullptr);
}

/// Lenient variant for validation: keeps going past bad lines.
inline WordVectorTable scan_word_vectors(const std::string& path, UnknownPolicy policy, LoadIssues& issues) {
  auto in = detail::open_input(path);
  return detail::parse_word_vectors(in, policy, &issues);
}

inline WordVectorTable parse_word_vectors(const std::string& contents,
                                          UnknownPolicy policy = UnknownPolicy::kZeroVector) {
  std::istringstream in(contents);
  return detail::parse_word_vectors(in, policy, nullptr);
}

/// Mean of the constituent token vectors. Under zero-vector policy unknown
/// tokens contribute zeros (and count in the denominator); under skip-token
/// they are left out.
inline Vector phrase_vector(std::string_view phrase, const WordVectorTable& table) {
  const auto tokens = text::split_ws(text::lower(phrase));
  if (tokens.empty()) throw EmptyPhraseError("phrase has no tokens");
  Vector sum = Vector::Zero(table.dimension());
  int used = 0;
  for (const auto& t : tokens) {
    if (auto v = table.lookup(t)) {
      sum += *v;
      ++used;
    }
  }
  if (used == 0) throw AllUnknownError("every token of '" + std::string(phrase) + "' is unknown");
  return sum / static_cast<double>(used);
}

}  // namespace metric_grouper
