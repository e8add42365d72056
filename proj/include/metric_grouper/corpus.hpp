#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_grouper/errors.hpp"
#include "metric_grouper/text.hpp"
#include "metric_grouper/word_vectors.hpp"

namespace metric_grouper {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - start; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Mention {
  std::string phrase;  // tokens[span] joined by single spaces
  Span span;
  std::optional<int> gold_group;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

struct Occurrence {
  std::size_t sentence = 0;
  Span span;

  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

using PhraseIndex = std::map<std::string, std::vector<Occurrence>>;

inline PhraseIndex build_phrase_index(const std::vector<AnnotatedSentence>& sentences) {
  PhraseIndex index;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& m : sentences[s].mentions) index[m.phrase].push_back({s, m.span});
  }
  return index;
}

/// Sentences with marked aspect-phrase mentions. Immutable once built.
class AnnotatedCorpus {
 public:
  AnnotatedCorpus() = default;
  explicit AnnotatedCorpus(std::vector<AnnotatedSentence> sentences)
      : sentences_(std::move(sentences)), phrase_index_(build_phrase_index(sentences_)) {}

  const std::vector<AnnotatedSentence>& sentences() const noexcept { return sentences_; }
  const PhraseIndex& phrase_index() const noexcept { return phrase_index_; }
  bool empty() const noexcept { return sentences_.empty(); }

  std::size_t mention_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences_) n += s.mentions.size();
    return n;
  }

  std::vector<std::string> phrases() const {
    std::vector<std::string> out;
    out.reserve(phrase_index_.size());
    for (const auto& [p, _] : phrase_index_) out.push_back(p);
    return out;
  }

  /// Distinct sentence ids mentioning `phrase`, in corpus order.
  std::vector<std::size_t> sentences_mentioning(const std::string& phrase) const {
    auto it = phrase_index_.find(phrase);
    if (it == phrase_index_.end()) throw UnknownPhraseError("phrase '" + phrase + "' not in corpus");
    std::vector<std::size_t> ids;
    for (const auto& occ : it->second) {
      if (ids.empty() || ids.back() != occ.sentence) ids.push_back(occ.sentence);
    }
    return ids;
  }

  friend bool operator==(const AnnotatedCorpus& a, const AnnotatedCorpus& b) {
    return a.sentences_ == b.sentences_ && a.phrase_index_ == b.phrase_index_;
  }

 private:
  std::vector<AnnotatedSentence> sentences_;
  PhraseIndex phrase_index_;
};

/// Gold group per phrase. A phrase whose mentions disagree takes the most
/// frequent label (smallest label on ties). Unlabeled phrases are absent.
inline std::map<std::string, int> gold_groups(const AnnotatedCorpus& corpus) {
  std::map<std::string, std::map<int, std::size_t>> votes;
  for (const auto& s : corpus.sentences()) {
    for (const auto& m : s.mentions) {
      if (m.gold_group) ++votes[m.phrase][*m.gold_group];
    }
  }
  std::map<std::string, int> out;
  for (const auto& [phrase, counts] : votes) {
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    out[phrase] = best->first;
  }
  return out;
}

namespace detail {

inline AnnotatedSentence parse_sentence(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  if (!j.contains("tokens") || !j["tokens"].is_array()) throw FormatError("missing 'tokens' array");
  AnnotatedSentence s;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw FormatError("token is not a string");
    auto tok = text::lower(t.get<std::string>());
    if (tok.empty() || text::split_ws(tok).size() != 1) {
      throw FormatError("token '" + tok + "' is empty or contains whitespace");
    }
    s.tokens.push_back(std::move(tok));
  }
  if (s.tokens.empty()) throw FormatError("sentence has no tokens");
  if (j.contains("mentions")) {
    if (!j["mentions"].is_array()) throw FormatError("'mentions' is not an array");
    std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
    for (const auto& jm : j["mentions"]) {
      if (!jm.is_object() || !jm.contains("start") || !jm.contains("end") || !jm.contains("phrase")) {
        throw FormatError("mention needs 'phrase', 'start' and 'end'");
      }
      if (!jm["start"].is_number_integer() || !jm["end"].is_number_integer() || !jm["phrase"].is_string()) {
        throw FormatError("mention fields have wrong types");
      }
      const auto start = jm["start"].get<long long>();
      const auto end = jm["end"].get<long long>();
      if (start < 0 || end <= start || end > static_cast<long long>(s.tokens.size())) {
        throw FormatError("span [" + std::to_string(start) + "," + std::to_string(end) +
                          ") out of range for " + std::to_string(s.tokens.size()) + " tokens");
      }
      Mention m;
      m.span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
      m.phrase = text::join(s.tokens.begin() + start, s.tokens.begin() + end);
      if (text::normalize_phrase(jm["phrase"].get<std::string>()) != m.phrase) {
        throw FormatError("phrase '" + jm["phrase"].get<std::string>() + "' does not match tokens '" +
                          m.phrase + "'");
      }
      if (jm.contains("group") && !jm["group"].is_null()) {
        if (!jm["group"].is_number_integer()) throw FormatError("'group' must be an integer");
        m.gold_group = jm["group"].get<int>();
      }
      if (!seen.emplace(m.phrase, m.span.start, m.span.end).second) {
        throw FormatError("duplicate mention '" + m.phrase + "'");
      }
      s.mentions.push_back(std::move(m));
    }
  }
  return s;
}

inline AnnotatedCorpus parse_corpus(std::istream& in, LoadIssues* issues) {
  std::vector<AnnotatedSentence> sentences;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::split_ws(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      sentences.push_back(parse_sentence(j));
    } catch (const nlohmann::json::exception& e) {
      if (!issues) throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
      issues->errors.emplace_back(std::string("invalid JSON: ") + e.what(), lineno);
    } catch (const FormatError& e) {
      if (!issues) throw FormatError(e.what(), lineno);
      issues->errors.emplace_back(e.what(), lineno);
    }
  }
  return AnnotatedCorpus(std::move(sentences));
}

}  // namespace detail

/// Line-delimited JSON corpus: {"tokens": [...], "mentions": [{phrase, start, end, group?}]}.
inline AnnotatedCorpus load_corpus(const std::string& path) {
  auto in = detail::open_input(path);
  return detail::parse_corpus(in, nullptr);
}

inline AnnotatedCorpus scan_corpus(const std::string& path, LoadIssues& issues) {
  auto in = detail::open_input(path);
  return detail::parse_corpus(in, &issues);
}

inline AnnotatedCorpus parse_corpus(const std::string& contents) {
  std::istringstream in(contents);
  return detail::parse_corpus(in, nullptr);
}

inline nlohmann::json to_json(const AnnotatedSentence& s) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& m : s.mentions) {
    nlohmann::json jm = {{"phrase", m.phrase}, {"start", m.span.start}, {"end", m.span.end}};
    if (m.gold_group) jm["group"] = *m.gold_group;
    mentions.push_back(std::move(jm));
  }
  return {{"tokens", s.tokens}, {"mentions", std::move(mentions)}};
}

inline std::string serialize_corpus(const AnnotatedCorpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

}  // namespace metric_grouper
