#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/geometry.hpp"
#include "herdpipe/core/image.hpp"
#include "herdpipe/core/mask.hpp"
#include "herdpipe/core/types.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/io/image_io.hpp"

namespace herdpipe {

/// Behavior starting at `start` (1-based frame) and lasting until the next span.
struct BehaviorSpan {
  FrameIndex start = 1;
  std::string behavior;
};

/// One elliptical blob moving horizontally and bouncing off the frame edges.
/// Speed and look follow the current behavior:
///   resting: static, dim; walking: 1.5 px/frame, bright;
///   running: 4 px/frame, bright with dark horizontal stripes.
struct BlobScript {
  std::string name;
  Rgb color{200, 80, 80};
  int x = 0;
  int y = 0;
  int width = 40;
  int height = 24;
  int direction = 1;  // +1 right, -1 left
  std::vector<BehaviorSpan> behaviors{{1, "walking"}};
};

struct SyntheticSpec {
  int width = 320;
  int height = 240;
  int n_frames = 100;
  Rgb background{60, 60, 60};
  std::vector<BlobScript> blobs;
};

struct SyntheticTruth {
  TrackRun tracks;                             // exact boxes and masks
  std::vector<io::BehaviorLabel> sparse_labels;  // one per behavior change
  std::vector<io::BehaviorLabel> dense_labels;   // every frame of every blob
  std::vector<Detection> detections;           // the boxes as score-1 "pig" detections
};

inline double behavior_speed(const std::string& behavior) {
  if (behavior == "resting") return 0.0;
  if (behavior == "walking") return 1.5;
  if (behavior == "running") return 4.0;
  throw Error(Errc::invalid_config, "unknown synthetic behavior '" + behavior + "'");
}

namespace detail {

inline const std::string& behavior_at(const BlobScript& b, FrameIndex f) {
  const BehaviorSpan* cur = &b.behaviors.front();
  for (const auto& s : b.behaviors)
    if (s.start <= f) cur = &s;
  return cur->behavior;
}

inline void validate_spec(const SyntheticSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.n_frames < 1)
    throw Error(Errc::invalid_config, "synthetic frame size and length must be positive");
  for (std::size_t i = 0; i < spec.blobs.size(); ++i) {
    const auto& b = spec.blobs[i];
    if (b.name.empty()) throw Error(Errc::invalid_config, "synthetic blob without a name");
    if (b.width < 2 || b.height < 2 || b.x < 0 || b.y < 0 || b.x + b.width > spec.width ||
        b.y + b.height > spec.height)
      throw Error(Errc::invalid_config, "blob " + b.name + " does not fit in the frame");
    if (b.behaviors.empty() || b.behaviors.front().start != 1)
      throw Error(Errc::invalid_config, "blob " + b.name + " needs a behavior starting at frame 1");
    for (std::size_t k = 1; k < b.behaviors.size(); ++k)
      if (b.behaviors[k].start <= b.behaviors[k - 1].start)
        throw Error(Errc::invalid_config, "blob " + b.name + " behavior script is not increasing");
    for (const auto& s : b.behaviors) behavior_speed(s.behavior);
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = spec.blobs[j];
      if (o.name == b.name) throw Error(Errc::invalid_config, "duplicate blob name " + b.name);
      const BBox bb{double(b.x), double(b.y), double(b.width), double(b.height)};
      const BBox ob{double(o.x), double(o.y), double(o.width), double(o.height)};
      if (intersection_area(bb, ob) > 0.0)
        throw Error(Errc::invalid_config, "blobs " + o.name + " and " + b.name + " overlap at spawn");
    }
  }
}

}  // namespace detail

/// Renders the scripted scene frame by frame, handing each frame (1-based
/// index) to `sink`, and returns the exact ground truth. Later blobs are
/// drawn over earlier ones; masks are the full ellipses.
inline SyntheticTruth render_synthetic(const SyntheticSpec& spec,
                                       const std::function<void(FrameIndex, const RgbImage&)>& sink) {
  detail::validate_spec(spec);
  SyntheticTruth truth;
  truth.tracks.tracker_id = "ground_truth";
  std::vector<double> xs;
  std::vector<int> dirs;
  for (const auto& b : spec.blobs) {
    truth.tracks.trajectories.push_back(Trajectory{b.name, {}});
    xs.push_back(b.x);
    dirs.push_back(b.direction >= 0 ? 1 : -1);
  }
  for (FrameIndex f = 1; f <= spec.n_frames; ++f) {
    RgbImage frame(spec.width, spec.height, spec.background);
    for (std::size_t i = 0; i < spec.blobs.size(); ++i) {
      const auto& b = spec.blobs[i];
      const auto& behavior = detail::behavior_at(b, f);
      if (f > 1) {
        double nx = xs[i] + dirs[i] * behavior_speed(behavior);
        if (nx < 0.0 || nx + b.width > spec.width) {
          dirs[i] = -dirs[i];
          nx = std::clamp(xs[i] + dirs[i] * behavior_speed(behavior), 0.0, double(spec.width - b.width));
        }
        xs[i] = nx;
      }
      const int x0 = static_cast<int>(std::lround(xs[i]));
      const Rgb bright = b.color;
      const Rgb dim{static_cast<std::uint8_t>(b.color[0] * 45 / 100), static_cast<std::uint8_t>(b.color[1] * 45 / 100),
                    static_cast<std::uint8_t>(b.color[2] * 45 / 100)};
      BinaryGrid grid(spec.width, spec.height);
      const double cx = x0 + b.width / 2.0, cy = b.y + b.height / 2.0;
      const double rx = b.width / 2.0, ry = b.height / 2.0;
      for (int y = b.y; y < b.y + b.height; ++y)
        for (int x = x0; x < x0 + b.width; ++x) {
          const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
          if (dx * dx + dy * dy > 1.0) continue;
          grid.at(x, y) = 1;
          Rgb c = behavior == "resting" ? dim : bright;
          if (behavior == "running" && ((y - b.y) / 3) % 2 == 1) c = {20, 20, 20};
          frame.set(x, y, c);
        }
      Mask mask = mask_encode(grid);
      const BBox box = mask_to_bbox(mask);
      truth.tracks.trajectories[i].entries[f] = TrackEntry{box, std::move(mask)};
      truth.dense_labels.push_back({f, b.name, behavior});
      if (f == 1 || detail::behavior_at(b, f - 1) != behavior) truth.sparse_labels.push_back({f, b.name, behavior});
      truth.detections.push_back(Detection{f, box, 1.0, "pig"});
    }
    sink(f, frame);
  }
  return truth;
}

/// File names of the written frames: frame_0000001.png, ...
inline std::string synthetic_frame_name(FrameIndex f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%07lld.png", static_cast<long long>(f));
  return buf;
}

/// Writes frames/ (PNG), gt_tracks.jsonl, gt_detections.jsonl, labels.jsonl
/// (sparse) and labels_dense.jsonl under `dir`.
inline SyntheticTruth write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const auto frames_dir = dir / "frames";
  std::filesystem::remove_all(frames_dir);
  std::filesystem::create_directories(frames_dir);
  auto truth = render_synthetic(spec, [&](FrameIndex f, const RgbImage& img) {
    io::write_image(frames_dir / synthetic_frame_name(f), img, io::ImageFormat::png);
  });
  io::write_track_run(dir / "gt_tracks.jsonl", truth.tracks);
  io::write_detections(dir / "gt_detections.jsonl", truth.detections);
  io::write_labels(dir / "labels.jsonl", truth.sparse_labels);
  io::write_labels(dir / "labels_dense.jsonl", truth.dense_labels);
  return truth;
}

/// A ready-made scene: `n_objects` blobs in separate horizontal lanes with
/// similar luminance. Behaviors cycle resting -> walking -> running in
/// segments of `segment` frames, offset per blob. With `crossing`, the first
/// two blobs share a lane and head toward each other.
inline SyntheticSpec default_scene(int n_objects, int n_frames, bool crossing = false, int segment = 100) {
  static const Rgb palette[] = {{200, 90, 90}, {90, 170, 90}, {110, 120, 230}, {180, 150, 60},
                                {170, 90, 190}, {70, 160, 170}, {210, 120, 60}, {120, 140, 120}};
  static const char* cycle[] = {"resting", "walking", "running"};
  if (n_objects < 1 || n_objects > 8) throw Error(Errc::invalid_config, "default scene holds 1 to 8 blobs");
  if (segment < 1) throw Error(Errc::invalid_config, "behavior segment must be >= 1 frame");
  SyntheticSpec spec;
  spec.width = 320;
  spec.n_frames = n_frames;
  const int lane_h = 30;
  spec.height = lane_h * n_objects;
  for (int i = 0; i < n_objects; ++i) {
    BlobScript b;
    char name[16];
    std::snprintf(name, sizeof name, "blob_%d", i + 1);
    b.name = name;
    b.color = palette[i];
    b.width = 40;
    b.height = 24;
    b.y = i * lane_h + 3;
    b.x = 20 + (i * 67) % (spec.width - 80);
    b.direction = i % 2 == 0 ? 1 : -1;
    b.behaviors.clear();
    for (FrameIndex start = 1, k = i; start <= n_frames; start += segment, ++k)
      b.behaviors.push_back({start, cycle[k % 3]});
    spec.blobs.push_back(std::move(b));
  }
  if (crossing && n_objects >= 2) {
    spec.blobs[1].y = spec.blobs[0].y;
    spec.blobs[0].x = 10;
    spec.blobs[0].direction = 1;
    spec.blobs[1].x = spec.width - 50;
    spec.blobs[1].direction = -1;
    for (int k : {0, 1}) spec.blobs[k].behaviors = {{1, "walking"}};
  }
  return spec;
}

}  // namespace herdpipe
