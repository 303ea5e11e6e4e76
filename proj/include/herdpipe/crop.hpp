#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/image.hpp"
#include "herdpipe/core/log.hpp"
#include "herdpipe/core/types.hpp"
#include "herdpipe/ingest.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/io/image_io.hpp"

namespace herdpipe {

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kWhite{255, 255, 255};

struct CropTask {
  FrameRef frame;
  std::string identity;
  BBox box;
  std::optional<Mask> mask;  // frame-sized; absent keeps the whole box interior
  Rgb bg_color = kBlack;
  int out_width = 224;
  int out_height = 224;
};

struct CropRecord {
  std::string filename;
  FrameIndex frame_global_index = 0;
  std::string identity;
  std::optional<std::string> behavior_label;

  friend bool operator==(const CropRecord&, const CropRecord&) = default;
};

struct CropFailure {
  FrameIndex frame_global_index = 0;
  std::string identity;
  std::string error;
};

/// "<7-digit global index>_<identity>.jpg" (".png" in lossless mode).
inline std::string crop_filename(FrameIndex global_index, const std::string& identity,
                                 io::ImageFormat format = io::ImageFormat::jpeg) {
  auto stem = frame_name(global_index);
  stem.resize(stem.size() - 4);
  return stem + "_" + identity + io::extension(format);
}

/// Copies the box window out of the frame, painting every pixel that is not
/// set in the mask with the background color. No resizing.
inline RgbImage isolate(const RgbImage& frame, const BBox& box, const std::optional<Mask>& mask, Rgb bg) {
  validate(box);
  const PixelWindow win = pixel_window(box, frame.width, frame.height);
  if (win.empty()) throw Error(Errc::degenerate_crop, "box " + describe(box) + " has zero area inside the frame");
  std::optional<BinaryGrid> grid;
  if (mask) {
    if (static_cast<int>(mask->width) != frame.width || static_cast<int>(mask->height) != frame.height)
      throw Error(Errc::invalid_input, "mask size does not match frame size");
    grid = mask_decode(*mask);
  }
  RgbImage out(win.width(), win.height(), bg);
  for (int y = win.y0; y < win.y1; ++y)
    for (int x = win.x0; x < win.x1; ++x)
      if (!grid || grid->at(x, y)) out.set(x - win.x0, y - win.y0, frame.get(x, y));
  return out;
}

/// Bilinear resampling with aligned corners: output corner pixels sample the
/// input corners exactly.
inline RgbImage resize_bilinear(const RgbImage& src, int out_w, int out_h) {
  if (src.empty() || out_w <= 0 || out_h <= 0) throw Error(Errc::invalid_input, "resize needs positive sizes");
  if (out_w == src.width && out_h == src.height) return src;
  auto coord = [](int i, int out, int in) {
    return out > 1 ? static_cast<double>(i) * (in - 1) / (out - 1) : (in - 1) / 2.0;
  };
  RgbImage dst(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const double sy = coord(y, out_h, src.height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = coord(x, out_w, src.width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      auto* d = dst.px(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = src.px(x0, y0)[c] * (1 - fx) + src.px(x1, y0)[c] * fx;
        const double bot = src.px(x0, y1)[c] * (1 - fx) + src.px(x1, y1)[c] * fx;
        d[c] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
      }
    }
  }
  return dst;
}

/// Isolate then scale to the task's output size (direct stretch).
inline RgbImage crop_instance(const RgbImage& frame, const CropTask& task) {
  if (task.out_width <= 0 || task.out_height <= 0) throw Error(Errc::invalid_config, "crop size must be positive");
  return resize_bilinear(isolate(frame, task.box, task.mask, task.bg_color), task.out_width, task.out_height);
}

inline int default_workers() {
  const int cores = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, cores - 2);
}

using FrameLoader = std::function<RgbImage(const FrameRef&)>;
using CropWriter = std::function<void(const std::string& filename, const std::vector<std::uint8_t>& bytes)>;
using LabelIndex = std::map<std::pair<FrameIndex, std::string>, std::string>;

struct CropBatchResult {
  std::vector<CropRecord> records;    // sorted by (frame, identity)
  std::vector<CropFailure> failures;  // error manifest
};

/// Processes tasks on a worker pool. Tasks sharing a frame are handled by the
/// same worker so each frame is decoded once; failures are collected and the
/// batch always completes.
inline CropBatchResult crop_batch(const std::vector<CropTask>& tasks, int workers, const FrameLoader& load,
                                  const CropWriter& write, io::ImageFormat format = io::ImageFormat::jpeg,
                                  const LabelIndex* labels = nullptr) {
  if (workers < 1) throw Error(Errc::invalid_config, "workers must be >= 1");
  std::map<FrameIndex, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < tasks.size(); ++i) groups[tasks[i].frame.global_index].push_back(i);
  std::vector<const std::vector<std::size_t>*> work;
  for (const auto& [f, idx] : groups) work.push_back(&idx);

  std::vector<std::optional<std::string>> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t w; (w = next.fetch_add(1)) < work.size();) {
      const auto& idx = *work[w];
      std::optional<RgbImage> frame;
      std::string load_error;
      try {
        frame = load(tasks[idx.front()].frame);
      } catch (const std::exception& e) {
        load_error = e.what();
      }
      for (auto i : idx) {
        if (!frame) {
          errors[i] = load_error;
          continue;
        }
        try {
          const auto& t = tasks[i];
          write(crop_filename(t.frame.global_index, t.identity, format), io::encode_image(crop_instance(*frame, t), format));
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    }
  };
  const int n = std::min<int>(workers, static_cast<int>(std::max<std::size_t>(work.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }

  CropBatchResult result;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    if (errors[i]) {
      log::warn("crop skipped for frame " + std::to_string(t.frame.global_index) + " " + t.identity + ": " + *errors[i]);
      result.failures.push_back({t.frame.global_index, t.identity, *errors[i]});
      continue;
    }
    CropRecord rec{crop_filename(t.frame.global_index, t.identity, format), t.frame.global_index, t.identity, {}};
    if (labels) {
      auto it = labels->find({t.frame.global_index, t.identity});
      if (it != labels->end()) rec.behavior_label = it->second;
    }
    result.records.push_back(std::move(rec));
  }
  auto key = [](const auto& r) { return std::make_pair(r.frame_global_index, r.identity); };
  std::sort(result.records.begin(), result.records.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(result.failures.begin(), result.failures.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return result;
}

/// Extends sparse annotations forward: an identity's label at frame t is its
/// most recent annotation at or before t. Frames before the first annotation
/// stay unlabeled. Output is ordered by identity, then frame.
inline std::vector<io::BehaviorLabel> forward_propagate_labels(const std::vector<io::BehaviorLabel>& sparse,
                                                               FrameIndex first, FrameIndex last) {
  std::map<std::string, std::map<FrameIndex, std::string>> by_identity;
  for (const auto& l : sparse) {
    auto [it, inserted] = by_identity[l.identity].emplace(l.frame, l.behavior);
    if (!inserted && it->second != l.behavior)
      throw Error(Errc::conflicting_annotation, l.identity + " at frame " + std::to_string(l.frame) + ": '" +
                                                    it->second + "' vs '" + l.behavior + "'");
  }
  std::vector<io::BehaviorLabel> dense;
  for (const auto& [identity, marks] : by_identity) {
    for (FrameIndex f = first; f <= last; ++f) {
      auto it = marks.upper_bound(f);
      if (it == marks.begin()) continue;
      dense.push_back({f, identity, std::prev(it)->second});
    }
  }
  return dense;
}

inline LabelIndex index_labels(const std::vector<io::BehaviorLabel>& dense) {
  LabelIndex idx;
  for (const auto& l : dense) idx[{l.frame, l.identity}] = l.behavior;
  return idx;
}

// ---- crop manifest ---------------------------------------------------------

struct CropManifest {
  std::string resize_mode = "stretch";
  Rgb bg_color = kBlack;
  int out_width = 224;
  int out_height = 224;
  std::string format = "jpg";
  std::vector<CropRecord> records;
};

inline std::filesystem::path crop_manifest_path(const std::filesystem::path& dir) { return dir / "manifest.jsonl"; }

inline void write_crop_manifest(const std::filesystem::path& dir, const CropManifest& m) {
  std::vector<io::json> rows;
  rows.push_back(io::json{{"resize", m.resize_mode},
                          {"bg", {m.bg_color[0], m.bg_color[1], m.bg_color[2]}},
                          {"size", {m.out_width, m.out_height}},
                          {"format", m.format}});
  for (const auto& r : m.records)
    rows.push_back(io::json{{"filename", r.filename},
                            {"frame_global_index", r.frame_global_index},
                            {"identity", r.identity},
                            {"behavior_label", r.behavior_label.value_or("")}});
  io::write_jsonl(crop_manifest_path(dir), rows);
}

inline CropManifest read_crop_manifest(const std::filesystem::path& dir) {
  const auto path = crop_manifest_path(dir);
  if (!std::filesystem::exists(path)) throw Error(Errc::dependency, "no crop manifest at " + path.string());
  CropManifest m;
  for (const auto& r : io::read_jsonl(path)) {
    if (!r.contains("filename")) {
      m.resize_mode = io::field_or<std::string>(r, "resize", "stretch");
      const auto bg = io::field_or<std::vector<int>>(r, "bg", {0, 0, 0});
      if (bg.size() == 3)
        m.bg_color = {static_cast<std::uint8_t>(bg[0]), static_cast<std::uint8_t>(bg[1]), static_cast<std::uint8_t>(bg[2])};
      const auto size = io::field_or<std::vector<int>>(r, "size", {224, 224});
      if (size.size() == 2) m.out_width = size[0], m.out_height = size[1];
      m.format = io::field_or<std::string>(r, "format", "jpg");
      continue;
    }
    CropRecord rec;
    rec.filename = io::field<std::string>(r, "filename");
    rec.frame_global_index = io::field<FrameIndex>(r, "frame_global_index");
    rec.identity = io::field<std::string>(r, "identity");
    const auto label = io::field_or<std::string>(r, "behavior_label", "");
    if (!label.empty()) rec.behavior_label = label;
    m.records.push_back(std::move(rec));
  }
  return m;
}

}  // namespace herdpipe
