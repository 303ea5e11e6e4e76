#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "herdpipe/assignment.hpp"
#include "herdpipe/core/error.hpp"
#include "herdpipe/core/types.hpp"

namespace herdpipe {

/// Tracking summary plus the raw CLEAR-MOT / identity counts.
struct MotReport {
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double mota = 0.0;
  std::size_t num_switches = 0;
  std::size_t fragmentations = 0;
  std::size_t mostly_tracked = 0;
  std::size_t partially_tracked = 0;
  std::size_t mostly_lost = 0;
  std::size_t num_tracklets = 0;
  double avg_tracklet_length = 0.0;

  std::size_t num_gt_instances = 0;
  std::size_t num_pred_instances = 0;
  std::size_t num_matches = 0;
  std::size_t num_false_positives = 0;
  std::size_t num_misses = 0;
  std::size_t idtp = 0;
  std::size_t idfp = 0;
  std::size_t idfn = 0;
  std::size_t num_gt_identities = 0;
  double iou_threshold = 0.5;
};

namespace detail {

struct FrameView {
  std::vector<std::size_t> ids;
  std::vector<BBox> boxes;
};

inline std::map<FrameIndex, FrameView> frames_of(const TrackRun& run) {
  std::map<FrameIndex, FrameView> out;
  for (std::size_t i = 0; i < run.trajectories.size(); ++i)
    for (const auto& [f, e] : run.trajectories[i].entries) {
      out[f].ids.push_back(i);
      out[f].boxes.push_back(e.box);
    }
  return out;
}

/// Frames where GT identity g and predicted identity p overlap at >= thr.
inline std::vector<std::vector<std::size_t>> overlap_counts(const TrackRun& gt, const TrackRun& pred, double thr) {
  std::vector<std::vector<std::size_t>> counts(gt.trajectories.size(),
                                               std::vector<std::size_t>(pred.trajectories.size(), 0));
  for (std::size_t g = 0; g < gt.trajectories.size(); ++g)
    for (std::size_t p = 0; p < pred.trajectories.size(); ++p) {
      const auto& ge = gt.trajectories[g].entries;
      const auto& pe = pred.trajectories[p].entries;
      for (const auto& [f, e] : ge) {
        auto it = pe.find(f);
        if (it != pe.end() && iou(e.box, it->second.box) >= thr) ++counts[g][p];
      }
    }
  return counts;
}

inline Assignment identity_assignment(const std::vector<std::vector<std::size_t>>& counts, std::size_t n_pred) {
  CostMatrix cost(counts.size(), n_pred);
  for (std::size_t g = 0; g < counts.size(); ++g)
    for (std::size_t p = 0; p < n_pred; ++p) cost(g, p) = -static_cast<double>(counts[g][p]);
  return hungarian(cost);
}

}  // namespace detail

/// Predicted identity -> GT identity under the globally optimal identity
/// pairing (the one IDF1 uses). Pairs that never overlap are omitted.
inline std::map<std::string, std::string> identity_correspondence(const TrackRun& gt, const TrackRun& pred,
                                                                  double iou_thr = 0.5) {
  const auto counts = detail::overlap_counts(gt, pred, iou_thr);
  std::map<std::string, std::string> out;
  for (const auto& [g, p] : detail::identity_assignment(counts, pred.trajectories.size()).pairs)
    if (counts[g][p] > 0) out[pred.trajectories[p].identity] = gt.trajectories[g].identity;
  return out;
}

inline MotReport evaluate_mot(const TrackRun& gt, const TrackRun& pred, double iou_thr = 0.5) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw Error(Errc::invalid_config, "IoU threshold must lie in (0,1]");
  MotReport rep;
  rep.iou_threshold = iou_thr;
  rep.num_gt_identities = gt.trajectories.size();
  for (const auto& t : gt.trajectories) rep.num_gt_instances += t.entries.size();
  for (const auto& t : pred.trajectories) rep.num_pred_instances += t.entries.size();
  if (rep.num_gt_instances == 0) throw Error(Errc::undefined_metrics, "ground truth has no entries");

  const auto gt_frames = detail::frames_of(gt);
  const auto pred_frames = detail::frames_of(pred);
  std::set<FrameIndex> frames;
  for (const auto& [f, v] : gt_frames) frames.insert(f);
  for (const auto& [f, v] : pred_frames) frames.insert(f);

  const std::size_t G = gt.trajectories.size();
  std::vector<std::optional<std::size_t>> last_match(G);
  std::vector<std::vector<bool>> tracked(G);  // per GT, over frames where it is present

  static const detail::FrameView kEmpty;
  for (auto f : frames) {
    auto git = gt_frames.find(f);
    auto pit = pred_frames.find(f);
    const auto& gv = git == gt_frames.end() ? kEmpty : git->second;
    const auto& pv = pit == pred_frames.end() ? kEmpty : pit->second;

    std::vector<std::optional<std::size_t>> match(gv.ids.size());  // local gt -> local pred
    std::vector<bool> pred_taken(pv.ids.size(), false);

    // Carry over last known pairings that still overlap.
    for (std::size_t gi = 0; gi < gv.ids.size(); ++gi) {
      const auto& prev = last_match[gv.ids[gi]];
      if (!prev) continue;
      for (std::size_t pi = 0; pi < pv.ids.size(); ++pi) {
        if (pv.ids[pi] != *prev || pred_taken[pi]) continue;
        if (iou(gv.boxes[gi], pv.boxes[pi]) >= iou_thr) {
          match[gi] = pi;
          pred_taken[pi] = true;
        }
        break;
      }
    }

    // Optimal assignment among the rest, maximizing matches then overlap.
    std::vector<std::size_t> free_g, free_p;
    for (std::size_t gi = 0; gi < gv.ids.size(); ++gi)
      if (!match[gi]) free_g.push_back(gi);
    for (std::size_t pi = 0; pi < pv.ids.size(); ++pi)
      if (!pred_taken[pi]) free_p.push_back(pi);
    if (!free_g.empty() && !free_p.empty()) {
      const double invalid = 2.0 + static_cast<double>(std::max(free_g.size(), free_p.size()));
      CostMatrix cost(free_g.size(), free_p.size());
      for (std::size_t r = 0; r < free_g.size(); ++r)
        for (std::size_t c = 0; c < free_p.size(); ++c) {
          const double v = iou(gv.boxes[free_g[r]], pv.boxes[free_p[c]]);
          cost(r, c) = v >= iou_thr ? 1.0 - v : invalid;
        }
      for (const auto& [r, c] : hungarian(cost).pairs)
        if (cost(r, c) < invalid) match[free_g[r]] = free_p[c];
    }

    std::size_t matched_here = 0;
    for (std::size_t gi = 0; gi < gv.ids.size(); ++gi) {
      const std::size_t g = gv.ids[gi];
      tracked[g].push_back(match[gi].has_value());
      if (!match[gi]) continue;
      ++matched_here;
      const std::size_t p = pv.ids[*match[gi]];
      if (last_match[g] && *last_match[g] != p) ++rep.num_switches;
      last_match[g] = p;
    }
    rep.num_matches += matched_here;
    rep.num_misses += gv.ids.size() - matched_here;
    rep.num_false_positives += pv.ids.size() - matched_here;
  }

  const double n_gt = static_cast<double>(rep.num_gt_instances);
  rep.mota = 1.0 - static_cast<double>(rep.num_misses + rep.num_false_positives + rep.num_switches) / n_gt;
  rep.recall = static_cast<double>(rep.num_matches) / n_gt;
  const double denom = static_cast<double>(rep.num_matches + rep.num_false_positives);
  rep.precision = denom > 0 ? static_cast<double>(rep.num_matches) / denom : 0.0;

  for (std::size_t g = 0; g < G; ++g) {
    const auto& flags = tracked[g];
    std::size_t runs = 0, hits = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) ++hits;
      if (flags[i] && (i == 0 || !flags[i - 1])) ++runs;
    }
    if (runs > 1) rep.fragmentations += runs - 1;
    const double coverage = flags.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(flags.size());
    if (coverage >= 0.8) ++rep.mostly_tracked;
    else if (coverage < 0.2) ++rep.mostly_lost;
    else ++rep.partially_tracked;
  }

  const auto counts = detail::overlap_counts(gt, pred, iou_thr);
  for (const auto& [g, p] : detail::identity_assignment(counts, pred.trajectories.size()).pairs)
    rep.idtp += counts[g][p];
  rep.idfn = rep.num_gt_instances - rep.idtp;
  rep.idfp = rep.num_pred_instances - rep.idtp;
  const double idtp = static_cast<double>(rep.idtp);
  rep.idf1 = 2.0 * idtp / static_cast<double>(rep.num_gt_instances + rep.num_pred_instances);
  rep.idp = rep.num_pred_instances > 0 ? idtp / static_cast<double>(rep.num_pred_instances) : 0.0;
  rep.idr = idtp / n_gt;

  std::size_t entries = 0;
  for (const auto& t : pred.trajectories) {
    FrameIndex prev = 0;
    bool first = true;
    for (const auto& [f, e] : t.entries) {
      if (first || f != prev + 1) ++rep.num_tracklets;
      prev = f;
      first = false;
      ++entries;
    }
  }
  rep.avg_tracklet_length =
      rep.num_tracklets > 0 ? static_cast<double>(entries) / static_cast<double>(rep.num_tracklets) : 0.0;
  return rep;
}

}  // namespace herdpipe
