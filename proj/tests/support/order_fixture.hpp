#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "herdpipe/learn/train.hpp"
#include "herdpipe/learn/windows.hpp"

namespace testing {

/// Sequences whose class is carried only by frame order: every sequence
/// draws `length` frame vectors, sorts them by their first coordinate, and
/// presents them ascending (class 0) or descending (class 1). Both classes
/// share the same per-frame distribution.
struct OrderDataset {
  herdpipe::learn::MatrixXd features;                  // one row per frame
  std::vector<int> frame_labels;                        // class of the frame's sequence
  std::vector<std::size_t> frame_sequence;              // sequence of each frame
  std::vector<herdpipe::learn::WindowExample> windows;  // one per sequence
};

inline OrderDataset order_only_dataset(std::size_t n_sequences, std::size_t length, Eigen::Index dim,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  OrderDataset d;
  d.features.resize(static_cast<Eigen::Index>(n_sequences * length), dim);
  for (std::size_t s = 0; s < n_sequences; ++s) {
    const int label = static_cast<int>(s % 2);
    std::vector<Eigen::VectorXd> frames;
    for (std::size_t t = 0; t < length; ++t) {
      Eigen::VectorXd v(dim);
      for (Eigen::Index k = 0; k < dim; ++k) v[k] = g(rng);
      frames.push_back(v);
    }
    std::sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
    if (label == 1) std::reverse(frames.begin(), frames.end());
    herdpipe::learn::WindowExample w;
    w.label = label;
    w.identity = "seq_" + std::to_string(s);
    w.first_frame = 1;
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t row = s * length + t;
      d.features.row(static_cast<Eigen::Index>(row)) = frames[t].transpose();
      d.frame_labels.push_back(label);
      d.frame_sequence.push_back(s);
      w.rows.push_back(row);
    }
    d.windows.push_back(std::move(w));
  }
  return d;
}

}  // namespace testing
