#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "herdpipe/core/geometry.hpp"
#include "herdpipe/core/image.hpp"
#include "herdpipe/core/log.hpp"
#include "herdpipe/core/mask.hpp"
#include "herdpipe/io/image_io.hpp"

namespace herdpipe {

struct OverlayItem {
  std::string identity;
  BBox box;
  std::optional<Mask> mask;
  std::optional<double> score;
};

inline int channel_distance(const Rgb& a, const Rgb& b) {
  int d = 0;
  for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(int(a[k]) - int(b[k])));
  return d;
}

/// `n` seeded colors, pairwise at least 64 apart in some channel while
/// that is achievable; the spacing relaxes only after repeated misses.
inline std::vector<Rgb> make_palette(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Rgb> out;
  int spacing = 64;
  int misses = 0;
  while (out.size() < n) {
    const auto v = rng();
    const Rgb c{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16)};
    const bool ok = std::all_of(out.begin(), out.end(), [&](const Rgb& o) { return channel_distance(c, o) >= spacing; });
    if (ok) {
      out.push_back(c);
      misses = 0;
    } else if (++misses > 2000) {
      spacing = std::max(1, spacing - 8);
      misses = 0;
    }
  }
  return out;
}

/// Draws masks (40% tint), 2-px box outlines and identity labels. Colors are
/// assigned from the seeded palette in sorted identity order. Items whose box
/// misses the frame entirely are skipped with a warning.
inline RgbImage render_overlay(const RgbImage& frame, const std::vector<OverlayItem>& items,
                               std::uint64_t palette_seed = 1) {
  if (items.empty()) return frame;
  std::vector<std::string> ids;
  for (const auto& it : items) ids.push_back(it.identity);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto palette = make_palette(ids.size(), palette_seed);
  auto color_of = [&](const std::string& id) {
    return palette[static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin())];
  };

  RgbImage out = frame;
  for (const auto& it : items) {
    validate(it.box);
    const auto win = pixel_window(it.box, frame.width, frame.height);
    if (win.empty()) {
      log::warn("overlay: box of " + it.identity + " " + describe(it.box) + " lies outside the frame; skipped");
      continue;
    }
    const Rgb c = color_of(it.identity);
    if (it.mask) {
      if (int(it.mask->width) != frame.width || int(it.mask->height) != frame.height)
        throw Error(Errc::invalid_input, "overlay mask for " + it.identity + " does not match the frame size");
      const auto grid = mask_decode(*it.mask);
      for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x) {
          if (!grid.at(x, y)) continue;
          auto* p = out.px(x, y);
          for (int k = 0; k < 3; ++k) p[k] = static_cast<std::uint8_t>(std::lround(0.6 * p[k] + 0.4 * c[k]));
        }
    }
    cv::Mat m = io::to_mat(out);
    const cv::Scalar bgr(c[2], c[1], c[0]);
    cv::rectangle(m, cv::Point(win.x0, win.y0), cv::Point(win.x1 - 1, win.y1 - 1), bgr, 2, cv::LINE_8);
    std::string label = it.identity;
    if (it.score) {
      char buf[16];
      std::snprintf(buf, sizeof buf, " %.2f", *it.score);
      label += buf;
    }
    cv::putText(m, label, cv::Point(win.x0 + 2, std::max(win.y0 - 3, 8)), cv::FONT_HERSHEY_PLAIN, 0.7, bgr, 1,
                cv::LINE_8);
    out = io::from_mat(m);
  }
  return out;
}

}  // namespace herdpipe
