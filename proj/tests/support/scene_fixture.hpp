#pragma once

#include <filesystem>

#include "herdpipe/io/files.hpp"
#include "herdpipe/pipeline/config.hpp"
#include "herdpipe/pipeline/synthetic.hpp"

namespace testing {

/// Writes a synthetic scene under `dir` with a config that runs every stage
/// on it: ground-truth boxes as detections, naive tracking, toy embeddings.
inline std::filesystem::path write_scene(const std::filesystem::path& dir, int objects, int frames, int segment,
                                         bool crossing = false, int max_epochs = 50) {
  herdpipe::write_synthetic(herdpipe::default_scene(objects, frames, crossing, segment), dir);
  const herdpipe::io::json cfg{
      {"seed", 7},
      {"paths",
       {{"root", "layout"},
        {"source", "frames"},
        {"detections", "gt_detections.jsonl"},
        {"gt_tracks", "gt_tracks.jsonl"},
        {"gt_detections", "gt_detections.jsonl"},
        {"labels", "labels.jsonl"}}},
      {"detect", {{"labels", {"pig"}}, {"threshold", 0.5}}},
      {"track", {{"kind", "naive"}, {"iou_floor", 0.3}}},
      {"crop", {{"width", 64}, {"height", 64}}},
      {"embed", {{"kind", "toy"}}},
      {"learn", {{"model", "mlp"}, {"max_epochs", max_epochs}}}};
  herdpipe::io::write_text(dir / "config.json", cfg.dump(2) + "\n");
  return dir / "config.json";
}

}  // namespace testing
