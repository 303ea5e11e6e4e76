#pragma once

// Line-delimited JSON records for every artifact that crosses a stage
// boundary. One record per line; field names are the on-disk contract.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "herdpipe/core/types.hpp"
#include "herdpipe/io/jsonl.hpp"

namespace herdpipe::io {

// ---- boxes and masks -------------------------------------------------------

inline BBox box_from(const json& r) {
  BBox b{field<double>(r, "x"), field<double>(r, "y"), field<double>(r, "w"), field<double>(r, "h")};
  validate(b);
  return b;
}

inline void put_box(json& r, const BBox& b) {
  r["x"] = b.x;
  r["y"] = b.y;
  r["w"] = b.w;
  r["h"] = b.h;
}

inline json mask_to_json(const Mask& m) {
  return json{{"width", m.width}, {"height", m.height}, {"counts", m.counts}};
}

inline Mask mask_from_json(const json& r) {
  Mask m;
  m.width = field<std::uint32_t>(r, "width");
  m.height = field<std::uint32_t>(r, "height");
  m.counts = field<std::vector<std::uint32_t>>(r, "counts");
  validate(m);
  return m;
}

// ---- detections ------------------------------------------------------------

inline json to_json(const Detection& d) {
  json r{{"frame_index", d.frame}, {"label", d.label}, {"score", d.score}};
  put_box(r, d.box);
  return r;
}

inline Detection detection_from(const json& r) {
  Detection d;
  d.frame = field<FrameIndex>(r, "frame_index");
  d.label = field<std::string>(r, "label");
  d.score = field<double>(r, "score");
  if (!(d.score >= 0.0 && d.score <= 1.0))
    throw Error(Errc::format, "detection score outside [0,1]: " + r.dump());
  d.box = box_from(r);
  return d;
}

inline std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for (const auto& r : read_jsonl(path)) out.push_back(detection_from(r));
  return out;
}

inline void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::vector<json> rows;
  for (const auto& d : dets) rows.push_back(to_json(d));
  write_jsonl(path, rows);
}

/// Groups detections by frame index.
inline std::map<FrameIndex, std::vector<Detection>> by_frame(const std::vector<Detection>& dets) {
  std::map<FrameIndex, std::vector<Detection>> out;
  for (const auto& d : dets) out[d.frame].push_back(d);
  return out;
}

// ---- seeds -----------------------------------------------------------------

inline Provenance provenance_from(const std::string& s) {
  if (s == "auto_filtered") return Provenance::auto_filtered;
  if (s == "human_reviewed") return Provenance::human_reviewed;
  throw Error(Errc::format, "unknown provenance '" + s + "'");
}

inline std::vector<json> seeds_to_records(const SeedSet& set) {
  std::vector<json> rows;
  for (const auto& s : set.seeds) {
    json r{{"object_name", s.object_name}};
    put_box(r, s.box);
    r["provenance"] = to_string(set.provenance);
    r["frame"] = set.frame;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline SeedSet seeds_from_records(const std::vector<json>& rows) {
  SeedSet set;
  bool first = true;
  for (const auto& r : rows) {
    Seed s{field<std::string>(r, "object_name"), box_from(r)};
    for (const auto& existing : set.seeds)
      if (existing.object_name == s.object_name)
        throw Error(Errc::format, "duplicate seed name '" + s.object_name + "'");
    const auto prov = provenance_from(field_or<std::string>(r, "provenance", "auto_filtered"));
    const auto frame = field_or<FrameIndex>(r, "frame", 1);
    if (first) {
      set.provenance = prov;
      set.frame = frame;
      first = false;
    } else if (prov != set.provenance || frame != set.frame) {
      throw Error(Errc::format, "seed records disagree on provenance or frame");
    }
    set.seeds.push_back(std::move(s));
  }
  return set;
}

inline SeedSet read_seeds(const std::filesystem::path& path) { return seeds_from_records(read_jsonl(path)); }

inline void write_seeds(const std::filesystem::path& path, const SeedSet& set) {
  write_jsonl(path, seeds_to_records(set));
}

// ---- mask streams (external tracker output) --------------------------------

struct MaskRecord {
  FrameIndex frame = 0;
  std::string identity;
  Mask mask;
};

inline json to_json(const MaskRecord& m) {
  json r = mask_to_json(m.mask);
  r["frame_index"] = m.frame;
  r["identity"] = m.identity;
  return r;
}

inline MaskRecord mask_record_from(const json& r) {
  MaskRecord m;
  m.frame = field<FrameIndex>(r, "frame_index");
  m.identity = field<std::string>(r, "identity");
  try {
    m.mask = mask_from_json(r);
  } catch (const Error& e) {
    if (e.code() == Errc::corrupt_mask)
      throw Error(Errc::corrupt_mask, "frame " + std::to_string(m.frame) + " identity " + m.identity + ": " + e.what());
    throw;
  }
  return m;
}

// ---- track runs ------------------------------------------------------------

/// A track file holds one optional header record (`tracker_id`,
/// `chunk_boundaries`) followed by one record per trajectory entry.
inline std::vector<json> track_run_to_records(const TrackRun& run) {
  std::vector<json> rows;
  rows.push_back(json{{"tracker_id", run.tracker_id}, {"chunk_boundaries", run.chunk_boundaries}});
  for (const auto& t : run.trajectories) {
    for (const auto& [frame, entry] : t.entries) {
      json r{{"identity", t.identity}, {"frame_index", frame}};
      put_box(r, entry.box);
      if (entry.mask) r["mask"] = mask_to_json(*entry.mask);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline TrackRun track_run_from_records(const std::vector<json>& rows) {
  TrackRun run;
  for (const auto& r : rows) {
    if (!r.contains("identity")) {
      run.tracker_id = field_or<std::string>(r, "tracker_id", "");
      run.chunk_boundaries = field_or<std::vector<FrameIndex>>(r, "chunk_boundaries", {});
      continue;
    }
    auto& traj = run.get_or_add(field<std::string>(r, "identity"));
    const auto frame = field<FrameIndex>(r, "frame_index");
    TrackEntry entry{box_from(r), std::nullopt};
    if (r.contains("mask")) entry.mask = mask_from_json(r["mask"]);
    if (!traj.entries.emplace(frame, std::move(entry)).second)
      throw Error(Errc::format, "duplicate entry for " + traj.identity + " at frame " + std::to_string(frame));
  }
  return run;
}

inline TrackRun read_track_run(const std::filesystem::path& path) {
  return track_run_from_records(read_jsonl(path));
}

inline void write_track_run(const std::filesystem::path& path, const TrackRun& run) {
  write_jsonl(path, track_run_to_records(run));
}

// ---- behavior annotations --------------------------------------------------

struct BehaviorLabel {
  FrameIndex frame = 0;
  std::string identity;
  std::string behavior;

  friend bool operator==(const BehaviorLabel&, const BehaviorLabel&) = default;
};

inline std::vector<BehaviorLabel> read_labels(const std::filesystem::path& path) {
  std::vector<BehaviorLabel> out;
  for (const auto& r : read_jsonl(path))
    out.push_back({field<FrameIndex>(r, "frame_index"), field<std::string>(r, "identity"),
                   field<std::string>(r, "behavior")});
  return out;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<BehaviorLabel>& labels) {
  std::vector<json> rows;
  for (const auto& l : labels)
    rows.push_back(json{{"frame_index", l.frame}, {"identity", l.identity}, {"behavior", l.behavior}});
  write_jsonl(path, rows);
}

}  // namespace herdpipe::io
