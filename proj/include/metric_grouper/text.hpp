#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace metric_grouper::text {

// ASCII lowercasing; multibyte UTF-8 sequences pass through untouched.
inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string join(std::vector<std::string>::const_iterator first,
                        std::vector<std::string>::const_iterator last,
                        std::string_view sep = " ") {
  return join(std::vector<std::string>(first, last), sep);
}

/// Canonical phrase form: lowercased tokens separated by single spaces.
inline std::string normalize_phrase(std::string_view phrase) {
  return join(split_ws(lower(phrase)));
}

}  // namespace metric_grouper::text
