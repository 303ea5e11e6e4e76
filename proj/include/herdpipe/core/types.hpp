#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "herdpipe/core/geometry.hpp"
#include "herdpipe/core/mask.hpp"

namespace herdpipe {

using FrameIndex = std::int64_t;

/// A frame inside a sequence layout. Global indices are 1-based.
struct FrameRef {
  FrameIndex global_index = 0;
  int chunk_id = 0;
  std::string filename;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct Detection {
  FrameIndex frame = 0;
  BBox box;
  double score = 0.0;
  std::string label;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Provenance { auto_filtered, human_reviewed };

inline std::string to_string(Provenance p) {
  return p == Provenance::human_reviewed ? "human_reviewed" : "auto_filtered";
}

struct Seed {
  std::string object_name;
  BBox box;

  friend bool operator==(const Seed&, const Seed&) = default;
};

/// Boxes that initialize tracking, all taken from `frame`.
struct SeedSet {
  FrameIndex frame = 1;
  std::vector<Seed> seeds;
  Provenance provenance = Provenance::auto_filtered;

  friend bool operator==(const SeedSet&, const SeedSet&) = default;
};

struct TrackEntry {
  BBox box;
  std::optional<Mask> mask;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct Trajectory {
  std::string identity;
  std::map<FrameIndex, TrackEntry> entries;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrackRun {
  std::vector<Trajectory> trajectories;
  std::vector<FrameIndex> chunk_boundaries;
  std::string tracker_id;

  const Trajectory* find(const std::string& identity) const {
    for (const auto& t : trajectories)
      if (t.identity == identity) return &t;
    return nullptr;
  }

  Trajectory& get_or_add(const std::string& identity) {
    for (auto& t : trajectories)
      if (t.identity == identity) return t;
    trajectories.push_back(Trajectory{identity, {}});
    return trajectories.back();
  }

  /// Sorted union of every frame index that carries an entry.
  std::vector<FrameIndex> frames() const {
    std::vector<FrameIndex> out;
    for (const auto& t : trajectories)
      for (const auto& [f, e] : t.entries) out.push_back(f);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

}  // namespace herdpipe
