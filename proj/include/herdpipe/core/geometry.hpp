#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "herdpipe/core/error.hpp"

namespace herdpipe {

/// Axis-aligned box in pixel units: top-left corner plus extent.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline std::string describe(const BBox& b) {
  std::ostringstream os;
  os << "[" << b.x << "," << b.y << "," << b.w << "," << b.h << "]";
  return os.str();
}

inline bool is_valid(const BBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w >= 0.0 && b.h >= 0.0;
}

inline void validate(const BBox& b) {
  if (!is_valid(b)) throw Error(Errc::invalid_geometry, "box " + describe(b));
}

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double inter = intersection_area(a, b);
  const double area_a = (a.right() - a.x) * (a.bottom() - a.y);
  const double area_b = (b.right() - b.x) * (b.bottom() - b.y);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Restrict a box to [0,width] x [0,height]. May produce a zero-area box.
inline BBox clamp_to(const BBox& b, double width, double height) {
  const double x0 = std::clamp(b.x, 0.0, width);
  const double y0 = std::clamp(b.y, 0.0, height);
  const double x1 = std::clamp(b.right(), 0.0, width);
  const double y1 = std::clamp(b.bottom(), 0.0, height);
  return BBox{x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

/// Integer pixel window covering a real-valued box: [x0,x1) x [y0,y1).
struct PixelWindow {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return width() <= 0 || height() <= 0; }
};

inline PixelWindow pixel_window(const BBox& b, int width, int height) {
  const BBox c = clamp_to(b, width, height);
  PixelWindow win;
  win.x0 = static_cast<int>(std::floor(c.x));
  win.y0 = static_cast<int>(std::floor(c.y));
  win.x1 = static_cast<int>(std::ceil(c.right()));
  win.y1 = static_cast<int>(std::ceil(c.bottom()));
  if (c.w <= 0.0 || c.h <= 0.0) win.x1 = win.x0;
  return win;
}

}  // namespace herdpipe
