#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "herdpipe/assignment.hpp"
#include "herdpipe/core/error.hpp"
#include "herdpipe/core/log.hpp"
#include "herdpipe/core/types.hpp"
#include "herdpipe/ingest.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/io/process.hpp"

namespace herdpipe {

using FrameBoxes = std::map<FrameIndex, std::vector<BBox>>;

namespace detail {

/// Hungarian assignment maximizing IoU; pairs below `floor` are never kept.
inline std::vector<std::pair<std::size_t, std::size_t>> match_by_iou(const std::vector<BBox>& rows,
                                                                     const std::vector<BBox>& cols, double floor) {
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  if (rows.empty() || cols.empty()) return kept;
  const double invalid = 2.0 + static_cast<double>(std::max(rows.size(), cols.size()));
  CostMatrix cost(rows.size(), cols.size());
  CostMatrix ious(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = iou(rows[r], cols[c]);
      ious(r, c) = v;
      cost(r, c) = (v >= floor && v > 0.0) ? 1.0 - v : invalid;
    }
  for (const auto& [r, c] : hungarian(cost).pairs)
    if (ious(r, c) >= floor && ious(r, c) > 0.0) kept.emplace_back(r, c);
  return kept;
}

}  // namespace detail

/// Frame-to-frame IoU tracker. Each identity keeps its last assigned box;
/// at every frame (from the seed frame on) identities and boxes are paired by
/// Hungarian assignment on IoU, and pairs under `iou_floor` leave the
/// identity coasting for that frame.
inline TrackRun naive_iou_tracker(const FrameBoxes& per_frame_boxes, const SeedSet& seeds, double iou_floor) {
  if (seeds.seeds.empty()) throw Error(Errc::no_seeds, "naive tracker needs at least one seed");
  TrackRun run;
  run.tracker_id = "naive";
  std::vector<BBox> last;
  for (const auto& s : seeds.seeds) {
    run.trajectories.push_back(Trajectory{s.object_name, {}});
    last.push_back(s.box);
  }
  for (auto it = per_frame_boxes.lower_bound(seeds.frame); it != per_frame_boxes.end(); ++it) {
    const auto& [frame, boxes] = *it;
    for (const auto& [r, c] : detail::match_by_iou(last, boxes, iou_floor)) {
      run.trajectories[r].entries[frame] = TrackEntry{boxes[c], std::nullopt};
      last[r] = boxes[c];
    }
  }
  return run;
}

/// Replays ground truth under the seed names: each seed claims the GT
/// identity it overlaps best at the seed frame, and receives that identity's
/// entries within [first, last].
inline TrackRun oracle_tracker(const TrackRun& gt, const SeedSet& seeds, FrameIndex first, FrameIndex last) {
  if (seeds.seeds.empty()) throw Error(Errc::no_seeds, "oracle tracker needs at least one seed");
  std::vector<BBox> seed_boxes, gt_boxes;
  std::vector<const Trajectory*> candidates;
  for (const auto& s : seeds.seeds) seed_boxes.push_back(s.box);
  for (const auto& t : gt.trajectories) {
    auto it = t.entries.find(seeds.frame);
    if (it == t.entries.end()) continue;
    gt_boxes.push_back(it->second.box);
    candidates.push_back(&t);
  }
  TrackRun run;
  run.tracker_id = "oracle";
  for (const auto& s : seeds.seeds) run.trajectories.push_back(Trajectory{s.object_name, {}});
  for (const auto& [r, c] : detail::match_by_iou(seed_boxes, gt_boxes, 0.0)) {
    const auto& src = candidates[c]->entries;
    for (auto it = src.lower_bound(first); it != src.end() && it->first <= last; ++it)
      run.trajectories[r].entries.insert(*it);
  }
  return run;
}

using MaskFrames = std::map<FrameIndex, std::map<std::string, Mask>>;

/// Parses a mask stream file. Corrupt masks name the frame they belong to.
inline MaskFrames read_mask_stream(const std::filesystem::path& path) {
  MaskFrames out;
  for (const auto& r : io::read_jsonl(path)) {
    auto rec = io::mask_record_from(r);
    out[rec.frame][rec.identity] = std::move(rec.mask);
  }
  return out;
}

inline void write_mask_stream(const std::filesystem::path& path, const MaskFrames& frames) {
  std::vector<io::json> rows;
  for (const auto& [frame, ids] : frames)
    for (const auto& [id, mask] : ids) rows.push_back(io::to_json(io::MaskRecord{frame, id, mask}));
  io::write_jsonl(path, rows);
}

/// Converts per-frame masks into trajectories; empty masks leave no entry.
inline TrackRun masks_to_run(const MaskFrames& frames, const std::string& tracker_id) {
  TrackRun run;
  run.tracker_id = tracker_id;
  for (const auto& [frame, ids] : frames) {
    for (const auto& [id, mask] : ids) {
      auto& traj = run.get_or_add(id);
      if (mask.area() == 0) continue;
      traj.entries[frame] = TrackEntry{mask_to_bbox(mask), mask};
    }
  }
  return run;
}

/// Runs the external tracker command for one chunk. Placeholders:
/// {chunk_dir}, {seeds_file}, {out_file}.
inline MaskFrames run_external_tracker(const std::string& cmd_template, const std::filesystem::path& chunk_dir,
                                       const SeedSet& seeds, int chunk_id, const std::filesystem::path& work_dir) {
  if (cmd_template.empty()) throw Error(Errc::invalid_config, "external tracker command template is empty");
  std::filesystem::create_directories(work_dir);
  const auto tag = chunk_dir_name(chunk_id);
  const auto seeds_file = work_dir / (tag + "_seeds.jsonl");
  const auto out_file = work_dir / (tag + "_masks.jsonl");
  std::filesystem::remove(out_file);
  io::write_seeds(seeds_file, seeds);
  const auto cmd = io::fill_template(cmd_template, {{"chunk_dir", chunk_dir.string()},
                                                    {"seeds_file", seeds_file.string()},
                                                    {"out_file", out_file.string()}});
  const auto result = io::run_command(cmd);
  if (result.exit_code != 0)
    throw Error(Errc::chunk_tracking, "chunk " + std::to_string(chunk_id) + ": tracker exited with " +
                                          std::to_string(result.exit_code) + ": " + result.output);
  if (!std::filesystem::exists(out_file))
    throw Error(Errc::chunk_tracking, "chunk " + std::to_string(chunk_id) + ": tracker produced no mask file");
  try {
    return read_mask_stream(out_file);
  } catch (const Error& e) {
    if (e.code() == Errc::corrupt_mask)
      throw Error(Errc::corrupt_mask, "chunk " + std::to_string(chunk_id) + ", " + e.what());
    throw Error(Errc::chunk_tracking, "chunk " + std::to_string(chunk_id) + ": malformed mask file: " + e.what());
  }
}

struct ChainResult {
  SeedSet seeds;
  std::vector<std::string> dropped;
};

/// Seeds for the next chunk from each identity's last entry within the final
/// `k` frames of the finished chunk (mask bounds when a mask is present).
inline ChainResult chain_chunks(const TrackRun& prev_chunk, FrameIndex chunk_last_frame, int k = 1) {
  if (k < 1) throw Error(Errc::invalid_config, "chain window must be >= 1");
  ChainResult out;
  out.seeds.frame = chunk_last_frame;
  out.seeds.provenance = Provenance::auto_filtered;
  for (const auto& t : prev_chunk.trajectories) {
    auto it = t.entries.upper_bound(chunk_last_frame);
    if (it != t.entries.begin()) {
      --it;
      if (it->first > chunk_last_frame - k) {
        const auto& e = it->second;
        const BBox box = (e.mask && e.mask->area() > 0) ? mask_to_bbox(*e.mask) : e.box;
        out.seeds.seeds.push_back({t.identity, box});
        continue;
      }
    }
    log::warn("chaining: identity " + t.identity + " absent from the last " + std::to_string(k) +
              " frame(s) before " + std::to_string(chunk_last_frame + 1) + "; dropped from seeds");
    out.dropped.push_back(t.identity);
  }
  return out;
}

using ChunkTracker = std::function<TrackRun(const ChunkSpan&, const SeedSet&)>;

/// Tracks chunk by chunk, seeding each chunk from the previous one. Chunks
/// run strictly in order; a tracker failure propagates and halts the run.
inline TrackRun track_chunks(const std::vector<ChunkSpan>& chunks, const SeedSet& initial, const ChunkTracker& tracker,
                             int chain_k = 1) {
  if (initial.seeds.empty()) throw Error(Errc::no_seeds, "no seeds; tracking cannot start");
  TrackRun run;
  SeedSet seeds = initial;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& chunk = chunks[i];
    run.chunk_boundaries.push_back(chunk.first_global_index);
    TrackRun part = tracker(chunk, seeds);
    if (run.tracker_id.empty()) run.tracker_id = part.tracker_id;
    for (const auto& t : part.trajectories) {
      auto& dst = run.get_or_add(t.identity);
      for (const auto& [f, e] : t.entries)
        if (f >= chunk.first_global_index && f <= chunk.last_global_index()) dst.entries.insert({f, e});
    }
    if (i + 1 < chunks.size()) {
      seeds = chain_chunks(part, chunk.last_global_index(), chain_k).seeds;
      if (seeds.seeds.empty())
        throw Error(Errc::no_seeds, "every identity was lost by the end of chunk " + std::to_string(chunk.chunk_id));
    }
  }
  return run;
}

}  // namespace herdpipe
