#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

namespace metric_grouper {

using Rng = std::mt19937_64;

/// `k` distinct values from [0, n), sorted ascending (Floyd's algorithm).
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, Rng& rng) {
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(k * 2);
  std::vector<std::uint64_t> out;
  out.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::uint64_t> dist(0, j);
    const auto t = dist(rng);
    const auto pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace metric_grouper
