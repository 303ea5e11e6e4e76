#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"

namespace herdpipe::learn {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplit{0.70, 0.15, 0.15};

namespace detail {

/// Largest-remainder apportionment of `total` by `ratios`; remainder ties go
/// to the earlier part.
inline std::array<std::size_t, 3> apportion(std::size_t total, const SplitRatios& ratios) {
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double raw = static_cast<double>(total) * ratios[k];
    out[k] = static_cast<std::size_t>(std::floor(raw + 1e-9));
    rem[k] = raw - static_cast<double>(out[k]);
    used += out[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[order[i % 3]];
  return out;
}

}  // namespace detail

/// Stratified train/val/test split. Each class is apportioned by largest
/// remainder; when remainders tie, the part furthest below its global target
/// wins, so rounding does not pile up in one part. Members are drawn by a
/// seeded shuffle within each class.
inline SplitIndices stratified_split(std::span<const int> labels, const SplitRatios& ratios = kDefaultSplit,
                                     std::uint64_t seed = 0) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw Error(Errc::invalid_config, "split ratios must be non-negative and sum to 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [c, idx] : by_class)
    if (idx.size() < 3)
      throw Error(Errc::stratification, "class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                                            " examples; at least 3 are required");

  const auto global_target = detail::apportion(labels.size(), ratios);
  std::array<std::size_t, 3> allocated{};
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (auto& [c, idx] : by_class) {
    const std::size_t n = idx.size();
    std::array<std::size_t, 3> take{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (int k = 0; k < 3; ++k) {
      const double raw = static_cast<double>(n) * ratios[k];
      take[k] = static_cast<std::size_t>(std::floor(raw + 1e-9));
      rem[k] = raw - static_cast<double>(take[k]);
      used += take[k];
    }
    while (used < n) {
      int best = -1;
      for (int k = 0; k < 3; ++k) {
        if (rem[k] < 0) continue;
        if (best < 0 || rem[k] > rem[best] + 1e-12) {
          best = k;
        } else if (std::abs(rem[k] - rem[best]) <= 1e-12) {
          const double dk = static_cast<double>(global_target[k]) - static_cast<double>(allocated[k] + take[k]);
          const double db = static_cast<double>(global_target[best]) - static_cast<double>(allocated[best] + take[best]);
          if (dk > db) best = k;
        }
      }
      ++take[best];
      rem[best] = -1.0;
      ++used;
    }
    for (int k = 0; k < 3; ++k) allocated[k] += take[k];

    std::vector<std::size_t> shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto it = shuffled.begin();
    out.train.insert(out.train.end(), it, it + static_cast<long>(take[0]));
    it += static_cast<long>(take[0]);
    out.val.insert(out.val.end(), it, it + static_cast<long>(take[1]));
    it += static_cast<long>(take[1]);
    out.test.insert(out.test.end(), it, shuffled.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace herdpipe::learn
