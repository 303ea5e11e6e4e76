#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "herdpipe/detect.hpp"
#include "herdpipe/io/jsonl.hpp"
#include "herdpipe/learn/metrics.hpp"
#include "herdpipe/mot.hpp"

namespace herdpipe {

using io::json;

// ---- machine-readable reports -------------------------------------------

inline json to_json(const DetectionReport& r) {
  return json{{"ap", r.ap},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"tpr", r.tpr},
              {"fpr", r.fpr},
              {"miss_rate", r.miss_rate},
              {"mean_iou", r.mean_iou},
              {"count_mae", r.count_mae},
              {"true_positives", r.true_positives},
              {"false_positives", r.false_positives},
              {"false_negatives", r.false_negatives},
              {"frames", r.frames},
              {"iou_threshold", r.config.iou_threshold},
              {"score_threshold", r.config.score_threshold}};
}

inline DetectionReport detection_report_from(const json& j) {
  DetectionReport r;
  r.ap = j.at("ap").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.tpr = j.at("tpr").get<double>();
  r.fpr = j.at("fpr").get<double>();
  r.miss_rate = j.at("miss_rate").get<double>();
  r.mean_iou = j.at("mean_iou").get<double>();
  r.count_mae = j.at("count_mae").get<double>();
  r.true_positives = j.value("true_positives", std::size_t{0});
  r.false_positives = j.value("false_positives", std::size_t{0});
  r.false_negatives = j.value("false_negatives", std::size_t{0});
  r.frames = j.value("frames", std::size_t{0});
  r.config.iou_threshold = j.value("iou_threshold", 0.5);
  r.config.score_threshold = j.value("score_threshold", 0.5);
  return r;
}

inline json to_json(const MotReport& r) {
  return json{{"idf1", r.idf1},
              {"idp", r.idp},
              {"idr", r.idr},
              {"recall", r.recall},
              {"precision", r.precision},
              {"mota", r.mota},
              {"num_switches", r.num_switches},
              {"num_fragmentations", r.fragmentations},
              {"mostly_tracked", r.mostly_tracked},
              {"partially_tracked", r.partially_tracked},
              {"mostly_lost", r.mostly_lost},
              {"num_tracklets", r.num_tracklets},
              {"avg_tracklet_length", r.avg_tracklet_length},
              {"num_gt_instances", r.num_gt_instances},
              {"num_pred_instances", r.num_pred_instances},
              {"num_matches", r.num_matches},
              {"num_false_positives", r.num_false_positives},
              {"num_misses", r.num_misses},
              {"idtp", r.idtp},
              {"idfp", r.idfp},
              {"idfn", r.idfn},
              {"num_gt_identities", r.num_gt_identities},
              {"iou_threshold", r.iou_threshold}};
}

inline MotReport mot_report_from(const json& j) {
  MotReport r;
  r.idf1 = j.at("idf1").get<double>();
  r.idp = j.value("idp", 0.0);
  r.idr = j.value("idr", 0.0);
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.mota = j.at("mota").get<double>();
  r.num_switches = j.at("num_switches").get<std::size_t>();
  r.fragmentations = j.value("num_fragmentations", std::size_t{0});
  r.mostly_tracked = j.value("mostly_tracked", std::size_t{0});
  r.partially_tracked = j.value("partially_tracked", std::size_t{0});
  r.mostly_lost = j.at("mostly_lost").get<std::size_t>();
  r.num_tracklets = j.at("num_tracklets").get<std::size_t>();
  r.avg_tracklet_length = j.at("avg_tracklet_length").get<double>();
  r.num_gt_instances = j.value("num_gt_instances", std::size_t{0});
  r.num_pred_instances = j.value("num_pred_instances", std::size_t{0});
  r.num_matches = j.value("num_matches", std::size_t{0});
  r.num_false_positives = j.value("num_false_positives", std::size_t{0});
  r.num_misses = j.value("num_misses", std::size_t{0});
  r.idtp = j.value("idtp", std::size_t{0});
  r.idfp = j.value("idfp", std::size_t{0});
  r.idfn = j.value("idfn", std::size_t{0});
  r.num_gt_identities = j.value("num_gt_identities", std::size_t{0});
  r.iou_threshold = j.value("iou_threshold", 0.5);
  return r;
}

/// Per-sequence MOT reports plus their column means.
using SequenceReports = std::vector<std::pair<std::string, MotReport>>;

inline json to_json(const SequenceReports& rows) {
  json seqs = json::array();
  for (const auto& [name, r] : rows) {
    json j = to_json(r);
    j["sequence"] = name;
    seqs.push_back(std::move(j));
  }
  return json{{"sequences", std::move(seqs)}};
}

inline json to_json(const learn::ClassificationReport& r) {
  json classes = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    classes.push_back({{"behavior", r.class_names[c]},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1_score", m.f1},
                       {"support", m.support},
                       {"absent", m.absent}});
  }
  return json{{"classes", std::move(classes)},
              {"weighted_average",
               {{"precision", r.weighted_precision},
                {"recall", r.weighted_recall},
                {"f1_score", r.weighted_f1},
                {"support", r.total_support}}},
              {"accuracy", r.accuracy},
              {"confusion", r.confusion}};
}

inline learn::ClassificationReport classification_report_from(const json& j) {
  learn::ClassificationReport r;
  for (const auto& c : j.at("classes")) {
    r.class_names.push_back(c.at("behavior").get<std::string>());
    learn::ClassMetrics m;
    m.precision = c.at("precision").get<double>();
    m.recall = c.at("recall").get<double>();
    m.f1 = c.at("f1_score").get<double>();
    m.support = c.at("support").get<std::size_t>();
    m.absent = c.value("absent", false);
    r.per_class.push_back(m);
  }
  const auto& w = j.at("weighted_average");
  r.weighted_precision = w.at("precision").get<double>();
  r.weighted_recall = w.at("recall").get<double>();
  r.weighted_f1 = w.at("f1_score").get<double>();
  r.total_support = w.at("support").get<std::size_t>();
  r.accuracy = j.value("accuracy", 0.0);
  if (j.contains("confusion")) r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
  return r;
}

// ---- aligned tables -------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string percent(double v) { return fixed(100.0 * v, 2) + "%"; }

/// Up to two decimals with trailing zeros removed: 8, 0.44, 600.
inline std::string compact(double v) {
  std::string s = fixed(v, 2);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

/// First column left-aligned, the rest right-aligned, two-space gutters.
inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c == 0) {
        line += row[c] + pad;
      } else {
        line += "  " + pad + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

inline std::string render_detection_table(const DetectionReport& r) {
  return detail::render_table({{"Metrics", "Value"},
                               {"Average Precision (AP)", detail::percent(r.ap)},
                               {"Precision", detail::percent(r.precision)},
                               {"Recall", detail::percent(r.recall)},
                               {"F1 Score", detail::percent(r.f1)},
                               {"True Positive Rate", detail::percent(r.tpr)},
                               {"False Positive Rate", detail::percent(r.fpr)},
                               {"Missed Detection Rate", detail::percent(r.miss_rate)},
                               {"Average IoU", detail::fixed(r.mean_iou, 3)},
                               {"Count MAE", detail::fixed(r.count_mae, 2)}});
}

inline std::string render_mot_table(const SequenceReports& rows) {
  std::vector<std::vector<std::string>> t{{"Validation Sequences", "Idf1", "Recall", "Precision", "Mostly Lost",
                                           "Num Switches", "Mota", "Avg. Tracklet Length", "Num Tracklets"}};
  double sums[8] = {};
  for (const auto& [name, r] : rows) {
    const double v[8] = {r.idf1,
                         r.recall,
                         r.precision,
                         static_cast<double>(r.mostly_lost),
                         static_cast<double>(r.num_switches),
                         r.mota,
                         r.avg_tracklet_length,
                         static_cast<double>(r.num_tracklets)};
    for (int k = 0; k < 8; ++k) sums[k] += v[k];
    t.push_back({name, detail::percent(v[0]), detail::percent(v[1]), detail::percent(v[2]), detail::compact(v[3]),
                 detail::compact(v[4]), detail::percent(v[5]), detail::compact(v[6]), detail::compact(v[7])});
  }
  if (!rows.empty()) {
    double m[8];
    for (int k = 0; k < 8; ++k) m[k] = sums[k] / static_cast<double>(rows.size());
    t.push_back({"Average", detail::percent(m[0]), detail::percent(m[1]), detail::percent(m[2]), detail::compact(m[3]),
                 detail::compact(m[4]), detail::percent(m[5]), detail::compact(m[6]), detail::compact(m[7])});
  }
  return detail::render_table(t);
}

inline std::string render_classification_table(const learn::ClassificationReport& r) {
  std::vector<std::vector<std::string>> t{{"Behavior", "Precision", "Recall", "F1-Score", "Support"}};
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    t.push_back({r.class_names[c], detail::fixed(m.precision, 3), detail::fixed(m.recall, 3), detail::fixed(m.f1, 3),
                 std::to_string(m.support)});
  }
  t.push_back({"Weighted Average", detail::fixed(r.weighted_precision, 3), detail::fixed(r.weighted_recall, 3),
               detail::fixed(r.weighted_f1, 3), std::to_string(r.total_support)});
  return detail::render_table(t);
}

}  // namespace herdpipe
