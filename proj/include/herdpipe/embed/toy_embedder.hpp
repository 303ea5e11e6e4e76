#pragma once

#include <cmath>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/image.hpp"

namespace herdpipe {

inline constexpr int kToyGrid = 16;
inline constexpr int kToyDim = kToyGrid * kToyGrid;

namespace detail {

/// weights[o][i]: fraction of source cell i that falls in output cell o,
/// normalized so each output row sums to 1 (exact area averaging).
inline std::vector<std::vector<double>> area_weights(int in, int out) {
  std::vector<std::vector<double>> w(out, std::vector<double>(in, 0.0));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < in && i < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0) w[o][i] = overlap / scale;
    }
  }
  return w;
}

}  // namespace detail

/// Deterministic 256-d descriptor: luma, exact area-average down to 16x16,
/// row-major flatten, L2 normalize. Constant rasters map to the uniform unit
/// vector.
inline std::vector<float> toy_embed(const RgbImage& img) {
  if (img.empty()) throw Error(Errc::invalid_input, "toy embedder needs a non-empty raster");
  const auto wx = detail::area_weights(img.width, kToyGrid);
  const auto wy = detail::area_weights(img.height, kToyGrid);

  std::vector<double> gray(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto* p = img.px(x, y);
      gray[static_cast<std::size_t>(y) * img.width + x] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }

  // Columns first, then rows.
  std::vector<double> cols(static_cast<std::size_t>(img.height) * kToyGrid, 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int ox = 0; ox < kToyGrid; ++ox) {
      double acc = 0.0;
      for (int x = 0; x < img.width; ++x)
        if (wx[ox][x] != 0.0) acc += wx[ox][x] * gray[static_cast<std::size_t>(y) * img.width + x];
      cols[static_cast<std::size_t>(y) * kToyGrid + ox] = acc;
    }
  std::vector<double> cells(kToyDim, 0.0);
  for (int oy = 0; oy < kToyGrid; ++oy)
    for (int ox = 0; ox < kToyGrid; ++ox) {
      double acc = 0.0;
      for (int y = 0; y < img.height; ++y)
        if (wy[oy][y] != 0.0) acc += wy[oy][y] * cols[static_cast<std::size_t>(y) * kToyGrid + ox];
      cells[oy * kToyGrid + ox] = acc;
    }

  bool constant = true;
  for (double c : cells) constant = constant && std::abs(c - cells[0]) < 1e-9;
  std::vector<float> out(kToyDim);
  if (constant) {
    for (auto& v : out) v = 1.0f / kToyGrid;
    return out;
  }
  double norm = 0.0;
  for (double c : cells) norm += c * c;
  norm = std::sqrt(norm);
  for (int i = 0; i < kToyDim; ++i) out[i] = static_cast<float>(cells[i] / norm);
  return out;
}

}  // namespace herdpipe
