#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/geometry.hpp"

namespace herdpipe {

/// Dense binary raster, row-major (`at(x, y)` = data[y * width + x]).
struct BinaryGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryGrid() = default;
  BinaryGrid(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

/// Uncompressed run-length mask. Runs alternate 0/1 starting with zeros and
/// walk the raster column by column (y fastest).
struct Mask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint32_t> counts;

  std::uint64_t pixel_count() const { return static_cast<std::uint64_t>(width) * height; }

  std::uint64_t area() const {
    std::uint64_t a = 0;
    for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
    return a;
  }

  friend bool operator==(const Mask&, const Mask&) = default;
};

inline void validate(const Mask& m) {
  const std::uint64_t total =
      std::accumulate(m.counts.begin(), m.counts.end(), std::uint64_t{0});
  if (total != m.pixel_count()) {
    throw Error(Errc::corrupt_mask, "run lengths sum to " + std::to_string(total) + ", expected " +
                                        std::to_string(m.pixel_count()) + " (" +
                                        std::to_string(m.width) + "x" + std::to_string(m.height) + ")");
  }
}

inline Mask mask_encode(const BinaryGrid& raster) {
  if (raster.width <= 0 || raster.height <= 0) {
    throw Error(Errc::invalid_input, "mask raster must have positive dimensions");
  }
  Mask m;
  m.width = static_cast<std::uint32_t>(raster.width);
  m.height = static_cast<std::uint32_t>(raster.height);
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < raster.width; ++x) {
    for (int y = 0; y < raster.height; ++y) {
      const std::uint8_t v = raster.at(x, y) ? 1 : 0;
      if (v != current) {
        m.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  m.counts.push_back(run);
  return m;
}

inline BinaryGrid mask_decode(const Mask& m) {
  validate(m);
  BinaryGrid g(static_cast<int>(m.width), static_cast<int>(m.height));
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : m.counts) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      const auto x = static_cast<int>(pos / m.height);
      const auto y = static_cast<int>(pos % m.height);
      g.at(x, y) = value;
    }
    value ^= 1;
  }
  return g;
}

/// Tightest box containing every set pixel.
inline BBox mask_to_bbox(const Mask& m) {
  validate(m);
  if (m.height == 0) throw Error(Errc::empty_mask, "mask has no pixels");
  std::uint64_t pos = 0;
  bool any = false;
  std::uint64_t xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (std::size_t i = 0; i < m.counts.size(); ++i) {
    const std::uint64_t run = m.counts[i];
    if (i % 2 == 1 && run > 0) {
      const std::uint64_t first = pos;
      const std::uint64_t last = pos + run - 1;
      std::uint64_t cs = first / m.height, ce = last / m.height;
      std::uint64_t lo = first % m.height, hi = last % m.height;
      if (ce > cs) {
        lo = 0;
        hi = m.height - 1;
      }
      if (!any) {
        xmin = cs, xmax = ce, ymin = lo, ymax = hi;
        any = true;
      } else {
        xmin = std::min(xmin, cs), xmax = std::max(xmax, ce);
        ymin = std::min(ymin, lo), ymax = std::max(ymax, hi);
      }
    }
    pos += run;
  }
  if (!any) throw Error(Errc::empty_mask, "mask has no set pixels");
  return BBox{static_cast<double>(xmin), static_cast<double>(ymin),
              static_cast<double>(xmax - xmin + 1), static_cast<double>(ymax - ymin + 1)};
}

/// Filled rectangle covering the pixel window of `box`.
inline Mask mask_from_box(const BBox& box, int width, int height) {
  BinaryGrid g(width, height);
  const PixelWindow win = pixel_window(box, width, height);
  if (!win.empty()) {
    for (int y = win.y0; y < win.y1; ++y)
      for (int x = win.x0; x < win.x1; ++x) g.at(x, y) = 1;
  }
  return mask_encode(g);
}

}  // namespace herdpipe
