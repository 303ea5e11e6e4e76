#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/types.hpp"

namespace herdpipe::learn {

/// One frame of one identity: its store row and class index (-1 = unlabeled).
struct FrameSample {
  FrameIndex frame = 0;
  std::size_t row = 0;
  int label = -1;
};

struct WindowConfig {
  int length = 8;
  int stride = 4;
  double majority_floor = 0.5;  // modal fraction must exceed this
};

struct WindowExample {
  std::vector<std::size_t> rows;  // store rows, in time order
  int label = 0;
  std::string identity;
  FrameIndex first_frame = 0;
};

/// A run of consecutive labeled frames of one identity.
struct Segment {
  std::string identity;
  std::vector<FrameSample> frames;
  int label = 0;  // modal label, lowest class on ties
};

namespace detail {

inline std::pair<int, std::size_t> modal_label(const std::vector<FrameSample>& frames, std::size_t first,
                                               std::size_t count) {
  std::map<int, std::size_t> hist;
  for (std::size_t i = first; i < first + count; ++i) ++hist[frames[i].label];
  std::pair<int, std::size_t> best{0, 0};
  for (const auto& [label, n] : hist)
    if (n > best.second) best = {label, n};
  return best;
}

}  // namespace detail

/// Splits each identity's frames into runs of consecutive labeled frames,
/// then cuts each run into blocks of at most `block_len` frames
/// (0 = no cutting). Input frames are sorted by frame index per identity.
inline std::vector<Segment> identity_segments(const std::map<std::string, std::vector<FrameSample>>& by_identity,
                                              std::size_t block_len = 0) {
  std::vector<Segment> out;
  for (const auto& [identity, unsorted] : by_identity) {
    auto frames = unsorted;
    std::sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
    std::vector<FrameSample> run;
    auto flush = [&] {
      for (std::size_t at = 0; at < run.size();) {
        const std::size_t n = block_len == 0 ? run.size() : std::min(block_len, run.size() - at);
        Segment seg{identity, std::vector<FrameSample>(run.begin() + static_cast<long>(at),
                                                       run.begin() + static_cast<long>(at + n)), 0};
        seg.label = detail::modal_label(seg.frames, 0, n).first;
        out.push_back(std::move(seg));
        at += n;
      }
      run.clear();
    };
    for (const auto& f : frames) {
      if (f.label < 0) {
        flush();
        continue;
      }
      if (!run.empty() && f.frame != run.back().frame + 1) flush();
      run.push_back(f);
    }
    flush();
  }
  return out;
}

/// Fixed-length windows over one segment, labeled by their modal frame
/// label and kept only when that label holds a fraction above the floor.
inline std::vector<WindowExample> segment_windows(const Segment& seg, const WindowConfig& cfg) {
  if (cfg.length < 1 || cfg.stride < 1) throw Error(Errc::invalid_config, "window length and stride must be >= 1");
  std::vector<WindowExample> out;
  const auto T = static_cast<std::size_t>(cfg.length);
  for (std::size_t start = 0; start + T <= seg.frames.size(); start += static_cast<std::size_t>(cfg.stride)) {
    const auto [label, n] = detail::modal_label(seg.frames, start, T);
    if (static_cast<double>(n) / static_cast<double>(T) <= cfg.majority_floor) continue;
    WindowExample w{{}, label, seg.identity, seg.frames[start].frame};
    for (std::size_t i = start; i < start + T; ++i) w.rows.push_back(seg.frames[i].row);
    out.push_back(std::move(w));
  }
  return out;
}

/// Windows over every identity's runs of consecutive labeled frames.
inline std::vector<WindowExample> sliding_windows(const std::map<std::string, std::vector<FrameSample>>& by_identity,
                                                  const WindowConfig& cfg = {}) {
  std::vector<WindowExample> out;
  for (const auto& seg : identity_segments(by_identity)) {
    auto w = segment_windows(seg, cfg);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace herdpipe::learn
