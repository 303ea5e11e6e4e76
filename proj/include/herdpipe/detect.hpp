#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/types.hpp"

namespace herdpipe {

/// Keeps detections whose label is targeted and whose score reaches the
/// threshold. Order is preserved.
inline std::vector<Detection> filter_detections(const std::vector<Detection>& dets,
                                                const std::set<std::string>& target_labels, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw Error(Errc::invalid_config, "threshold must lie in [0,1]");
  std::vector<Detection> out;
  for (const auto& d : dets)
    if (target_labels.count(d.label) && d.score >= threshold) out.push_back(d);
  return out;
}

/// Names seeds <prefix>_01, <prefix>_02, ... by descending score; ties go to
/// the smaller x, then the smaller y. Boxes are clamped to the frame when its
/// size is known.
inline SeedSet make_seeds(const std::vector<Detection>& filtered, const std::string& naming_prefix,
                          std::optional<std::pair<int, int>> frame_size = std::nullopt) {
  if (filtered.empty()) throw Error(Errc::no_seeds, "no detections survived filtering; tracking cannot start");
  const FrameIndex frame = filtered.front().frame;
  for (const auto& d : filtered)
    if (d.frame != frame) throw Error(Errc::invalid_input, "seed detections span several frames");

  std::vector<Detection> sorted = filtered;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    return a.box.y < b.box.y;
  });

  SeedSet set;
  set.frame = frame;
  set.provenance = Provenance::auto_filtered;
  const int width = sorted.size() >= 100 ? 3 : 2;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%0*zu", width, i + 1);
    BBox box = sorted[i].box;
    if (frame_size) box = clamp_to(box, frame_size->first, frame_size->second);
    set.seeds.push_back({naming_prefix + "_" + buf, box});
  }
  return set;
}

struct MatchedPair {
  std::size_t gt = 0;
  std::size_t det = 0;
  double iou = 0.0;
};

struct FrameMatching {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_gt;   // false negatives
  std::vector<std::size_t> unmatched_det;  // false positives
};

/// Score-ordered greedy matching: each detection, highest score first, claims
/// the unmatched ground-truth box with the largest IoU at or above iou_thr.
/// Ties in score keep input order; ties in IoU go to the lower GT index.
inline FrameMatching match_frame(const std::vector<BBox>& gt, const std::vector<Detection>& dets, double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw Error(Errc::invalid_config, "IoU threshold must lie in (0,1]");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  FrameMatching m;
  std::vector<bool> taken(gt.size(), false);
  for (auto d : order) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(gt[g], dets[d].box);
      if (v >= iou_thr && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      m.pairs.push_back({*best, d, best_iou});
    } else {
      m.unmatched_det.push_back(d);
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g)
    if (!taken[g]) m.unmatched_gt.push_back(g);
  return m;
}

struct DetectionEvalConfig {
  double iou_threshold = 0.5;
  /// Operating point for the single-threshold metrics. AP always sweeps all
  /// scores.
  double score_threshold = 0.5;
};

/// Detection summary. `fpr` is FP/(TP+FP), i.e. 1 - precision.
struct DetectionReport {
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double miss_rate = 0.0;
  double mean_iou = 0.0;
  double count_mae = 0.0;

  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t frames = 0;
  DetectionEvalConfig config;
};

using GtFrames = std::map<FrameIndex, std::vector<BBox>>;
using DetFrames = std::map<FrameIndex, std::vector<Detection>>;

/// All-points interpolated AP from precision/recall points ordered by
/// decreasing score threshold.
inline double all_points_ap(const std::vector<double>& recall, const std::vector<double>& precision) {
  std::vector<double> envelope = precision;
  for (std::size_t k = envelope.size(); k-- > 1;) envelope[k - 1] = std::max(envelope[k - 1], envelope[k]);
  double ap = 0.0, prev_r = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_r) * envelope[k];
    prev_r = recall[k];
  }
  return ap;
}

inline DetectionReport evaluate_detection(const GtFrames& gt_frames, const DetFrames& det_frames,
                                          const DetectionEvalConfig& cfg = {}) {
  std::set<FrameIndex> frames;
  std::size_t total_gt = 0;
  for (const auto& [f, boxes] : gt_frames) {
    frames.insert(f);
    total_gt += boxes.size();
  }
  for (const auto& [f, dets] : det_frames) frames.insert(f);
  if (total_gt == 0) throw Error(Errc::undefined_metrics, "no ground-truth boxes; recall is undefined");

  static const std::vector<BBox> kNoGt;
  static const std::vector<Detection> kNoDets;
  auto gt_of = [&](FrameIndex f) -> const std::vector<BBox>& {
    auto it = gt_frames.find(f);
    return it == gt_frames.end() ? kNoGt : it->second;
  };
  auto dets_of = [&](FrameIndex f) -> const std::vector<Detection>& {
    auto it = det_frames.find(f);
    return it == det_frames.end() ? kNoDets : it->second;
  };

  DetectionReport rep;
  rep.config = cfg;
  rep.frames = frames.size();

  // AP: greedy matching in score order is prefix-stable, so one pass labels
  // every detection TP/FP for all thresholds at once.
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> scored;
  for (auto f : frames) {
    const auto& dets = dets_of(f);
    const auto m = match_frame(gt_of(f), dets, cfg.iou_threshold);
    std::vector<bool> tp(dets.size(), false);
    for (const auto& p : m.pairs) tp[p.det] = true;
    for (std::size_t i = 0; i < dets.size(); ++i) scored.push_back({dets[i].score, tp[i]});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<double> rec, prec;
  std::size_t cum_tp = 0, cum_fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].score == scored[i].score) {
      (scored[j].tp ? cum_tp : cum_fp)++;
      ++j;
    }
    rec.push_back(static_cast<double>(cum_tp) / static_cast<double>(total_gt));
    prec.push_back(static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp));
    i = j;
  }
  rep.ap = all_points_ap(rec, prec);

  // Operating-point metrics.
  double iou_sum = 0.0, abs_count_sum = 0.0;
  for (auto f : frames) {
    std::vector<Detection> kept;
    for (const auto& d : dets_of(f))
      if (d.score >= cfg.score_threshold) kept.push_back(d);
    const auto& gt = gt_of(f);
    const auto m = match_frame(gt, kept, cfg.iou_threshold);
    rep.true_positives += m.pairs.size();
    rep.false_positives += m.unmatched_det.size();
    rep.false_negatives += m.unmatched_gt.size();
    for (const auto& p : m.pairs) iou_sum += p.iou;
    abs_count_sum += std::abs(static_cast<double>(kept.size()) - static_cast<double>(gt.size()));
  }
  const double tp = static_cast<double>(rep.true_positives);
  const double fp = static_cast<double>(rep.false_positives);
  const double fn = static_cast<double>(rep.false_negatives);
  rep.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  rep.recall = tp / (tp + fn);
  rep.f1 = rep.precision + rep.recall > 0 ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall) : 0.0;
  rep.tpr = rep.recall;
  rep.fpr = tp + fp > 0 ? fp / (tp + fp) : 0.0;
  rep.miss_rate = 1.0 - rep.tpr;
  rep.mean_iou = rep.true_positives > 0 ? iou_sum / tp : 0.0;
  rep.count_mae = frames.empty() ? 0.0 : abs_count_sum / static_cast<double>(frames.size());
  return rep;
}

}  // namespace herdpipe
