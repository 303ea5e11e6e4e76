#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/log.hpp"
#include "herdpipe/crop.hpp"
#include "herdpipe/detect.hpp"
#include "herdpipe/embed/store.hpp"
#include "herdpipe/ingest.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/learn/checkpoint.hpp"
#include "herdpipe/learn/loss.hpp"
#include "herdpipe/learn/metrics.hpp"
#include "herdpipe/learn/split.hpp"
#include "herdpipe/learn/train.hpp"
#include "herdpipe/learn/windows.hpp"
#include "herdpipe/mot.hpp"
#include "herdpipe/pipeline/config.hpp"
#include "herdpipe/report.hpp"
#include "herdpipe/track.hpp"

namespace herdpipe {

/// File conventions under a layout root.
struct LayoutPaths {
  fs::path root;

  fs::path manifest() const { return manifest_path(root); }
  fs::path detections() const { return root / "detections.jsonl"; }
  fs::path seeds() const { return root / "seeds.jsonl"; }
  fs::path tracks() const { return root / "tracks.jsonl"; }
  fs::path tracker_work() const { return root / ".tracker"; }
  fs::path crops() const { return root / "crops"; }
  fs::path embeddings() const { return root / "embeddings"; }
  fs::path model() const { return root / "model.mdl"; }
  fs::path ledger() const { return root / "ledger.jsonl"; }
};

// ---- detect ------------------------------------------------------------

/// Copies an external detector's output into the layout after validating
/// every record.
inline std::vector<Detection> import_detections(const fs::path& src, const fs::path& dst) {
  if (!fs::exists(src)) throw Error(Errc::dependency, "detections file " + src.string() + " not found");
  auto dets = io::read_detections(src);
  io::write_detections(dst, dets);
  return dets;
}

/// Two-stage filter on the seed frame: label and score threshold, then
/// deterministic naming.
inline SeedSet seeds_from_detections(const std::vector<Detection>& dets, FrameIndex seed_frame,
                                     const PipelineConfig::Detect& cfg,
                                     std::optional<std::pair<int, int>> frame_size = std::nullopt) {
  std::vector<Detection> on_frame;
  for (const auto& d : dets)
    if (d.frame == seed_frame) on_frame.push_back(d);
  auto seeds = make_seeds(filter_detections(on_frame, cfg.labels, cfg.threshold), cfg.prefix, frame_size);
  seeds.frame = seed_frame;
  return seeds;
}

/// Writes auto-filtered seeds unless a human-reviewed seeds file is already
/// in place, which is kept untouched.
inline SeedSet detect_filter(const std::vector<Detection>& dets, const SequenceLayout& layout,
                             const PipelineConfig::Detect& cfg, const fs::path& seeds_path) {
  if (fs::exists(seeds_path)) {
    auto existing = io::read_seeds(seeds_path);
    if (existing.provenance == Provenance::human_reviewed) {
      log::info("keeping human-reviewed seeds at " + seeds_path.string());
      return existing;
    }
  }
  if (layout.frames.empty()) throw Error(Errc::dependency, "layout " + layout.root.string() + " has no frames");
  const auto& first = layout.frames.front().frame;
  const auto img = io::read_image(layout.frame_path(first));
  auto seeds = seeds_from_detections(dets, first.global_index, cfg, std::make_pair(img.width, img.height));
  io::write_seeds(seeds_path, seeds);
  return seeds;
}

// ---- track ---------------------------------------------------------------

inline FrameBoxes boxes_by_frame(const std::vector<Detection>& dets, const PipelineConfig::Detect& cfg) {
  FrameBoxes out;
  for (const auto& d : filter_detections(dets, cfg.labels, cfg.threshold)) out[d.frame].push_back(d.box);
  return out;
}

/// Chunked tracking of a whole layout with the configured tracker.
inline TrackRun track_layout(const SequenceLayout& layout, const SeedSet& seeds, const PipelineConfig& cfg,
                             const std::vector<Detection>* dets, const TrackRun* gt, const fs::path& work_dir) {
  ChunkTracker tracker;
  FrameBoxes boxes;
  if (cfg.track.kind == "naive") {
    if (!dets) throw Error(Errc::dependency, "naive tracker needs detections");
    boxes = boxes_by_frame(*dets, cfg.detect);
    tracker = [&](const ChunkSpan& chunk, const SeedSet& s) {
      FrameBoxes part(boxes.lower_bound(s.frame), boxes.upper_bound(chunk.last_global_index()));
      return naive_iou_tracker(part, s, cfg.track.iou_floor);
    };
  } else if (cfg.track.kind == "oracle") {
    if (!gt) throw Error(Errc::dependency, "oracle tracker needs ground-truth trajectories (paths.gt_tracks)");
    tracker = [&](const ChunkSpan& chunk, const SeedSet& s) {
      return oracle_tracker(*gt, s, chunk.first_global_index, chunk.last_global_index());
    };
  } else {
    tracker = [&](const ChunkSpan& chunk, const SeedSet& s) {
      return masks_to_run(
          run_external_tracker(cfg.track.cmd, layout.chunk_path(chunk.chunk_id), s, chunk.chunk_id, work_dir),
          "external");
    };
  }
  return track_chunks(layout.chunks(), seeds, tracker, cfg.track.chain_frames);
}

// ---- crop ----------------------------------------------------------------

/// Dense labels keyed by the run's identities. Annotations name ground-truth
/// identities; when `gt` is given they are carried over to the predicted
/// identity paired with each GT identity under the IDF1 pairing.
inline LabelIndex labels_for_run(const std::vector<io::BehaviorLabel>& sparse, const TrackRun& run,
                                 const TrackRun* gt, double iou_thr, FrameIndex first, FrameIndex last) {
  auto dense = forward_propagate_labels(sparse, first, last);
  if (!gt) return index_labels(dense);
  std::map<std::string, std::string> gt_to_pred;
  for (const auto& [p, g] : identity_correspondence(*gt, run, iou_thr)) gt_to_pred[g] = p;
  LabelIndex out;
  for (const auto& l : dense) {
    auto it = gt_to_pred.find(l.identity);
    if (it != gt_to_pred.end()) out[{l.frame, it->second}] = l.behavior;
  }
  return out;
}

/// Crops every tracked instance into `out_dir` (cleared first) and writes the
/// crop manifest plus an error manifest for failed instances.
inline CropManifest crop_layout(const SequenceLayout& layout, const TrackRun& run, const LabelIndex* labels,
                                const PipelineConfig& cfg, const fs::path& out_dir) {
  std::vector<CropTask> tasks;
  for (const auto& t : run.trajectories)
    for (const auto& [f, e] : t.entries) {
      const auto ref = layout.find(f);
      if (!ref) continue;
      tasks.push_back(CropTask{*ref, t.identity, e.box, e.mask, cfg.crop.bg, cfg.crop.width, cfg.crop.height});
    }
  fs::remove_all(out_dir);
  fs::create_directories(out_dir);
  const auto format = crop_format(cfg);
  auto result = crop_batch(
      tasks, crop_workers(cfg), [&](const FrameRef& ref) { return io::read_image(layout.frame_path(ref)); },
      [&](const std::string& name, const std::vector<std::uint8_t>& bytes) { io::write_bytes(out_dir / name, bytes); },
      format, labels);
  CropManifest m;
  m.bg_color = cfg.crop.bg;
  m.out_width = cfg.crop.width;
  m.out_height = cfg.crop.height;
  m.format = cfg.crop.format;
  m.records = std::move(result.records);
  write_crop_manifest(out_dir, m);
  std::vector<io::json> errors;
  for (const auto& f : result.failures)
    errors.push_back({{"frame_global_index", f.frame_global_index}, {"identity", f.identity}, {"error", f.error}});
  io::write_jsonl(out_dir / "errors.jsonl", errors);
  return m;
}

// ---- embed ---------------------------------------------------------------

inline EmbeddingStore embed_layout(const fs::path& crops_dir, const fs::path& out_dir, const PipelineConfig& cfg) {
  fs::remove_all(out_dir);
  if (cfg.embed.kind == "toy") return embed_crops_toy(crops_dir, out_dir);
  return run_external_embedder(cfg.embed.cmd, crops_dir, out_dir, static_cast<std::size_t>(cfg.embed.dim));
}

// ---- learn ---------------------------------------------------------------

/// Examples and the train/val/test partition derived from an embedding store.
/// The same store, class list, seed and window settings always reproduce the
/// same partition.
struct PreparedData {
  learn::ModelKind kind = learn::ModelKind::mlp;
  std::vector<std::string> class_names;
  learn::MatrixXd features;                  // mlp: one row per example; bilstm: one row per store row
  std::vector<int> labels;                   // per example
  std::vector<learn::WindowExample> windows;  // bilstm examples
  learn::SplitIndices split;                 // example indices
};

inline std::vector<std::string> store_classes(const EmbeddingStore& store) {
  std::set<std::string> names;
  for (const auto& r : store.rows)
    if (!r.label.empty()) names.insert(r.label);
  return {names.begin(), names.end()};
}

inline PreparedData prepare_data(const EmbeddingStore& store, learn::ModelKind kind,
                                 std::vector<std::string> class_names, const learn::WindowConfig& window,
                                 const learn::SplitRatios& ratios, std::uint64_t seed) {
  if (class_names.empty()) class_names = store_classes(store);
  if (class_names.empty()) throw Error(Errc::invalid_input, "embedding store " + store.dir.string() + " has no labels");
  std::map<std::string, int> class_of;
  for (std::size_t c = 0; c < class_names.size(); ++c) class_of[class_names[c]] = static_cast<int>(c);
  auto label_of = [&](const StoreRow& r) {
    auto it = class_of.find(r.label);
    return it == class_of.end() ? -1 : it->second;
  };

  PreparedData d;
  d.kind = kind;
  d.class_names = class_names;
  const auto dim = static_cast<learn::Index>(store.dim);
  if (kind == learn::ModelKind::mlp) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < store.rows.size(); ++i)
      if (label_of(store.rows[i]) >= 0) rows.push_back(i);
    d.features.resize(static_cast<learn::Index>(rows.size()), dim);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      for (learn::Index k = 0; k < dim; ++k) d.features(static_cast<learn::Index>(e), k) = store.vectors[rows[e]][k];
      d.labels.push_back(label_of(store.rows[rows[e]]));
    }
    d.split = learn::stratified_split(d.labels, ratios, seed);
    return d;
  }

  d.features.resize(static_cast<learn::Index>(store.rows.size()), dim);
  std::map<std::string, std::vector<learn::FrameSample>> by_identity;
  for (std::size_t i = 0; i < store.rows.size(); ++i) {
    for (learn::Index k = 0; k < dim; ++k) d.features(static_cast<learn::Index>(i), k) = store.vectors[i][k];
    const auto& r = store.rows[i];
    by_identity[r.identity].push_back({r.frame_global_index, i, label_of(r)});
  }
  // Split whole identity segments first so no frame feeds windows on both
  // sides of the partition.
  const auto segments =
      learn::identity_segments(by_identity, 4 * static_cast<std::size_t>(std::max(window.length, 1)));
  std::vector<int> seg_labels;
  for (const auto& s : segments) seg_labels.push_back(s.label);
  const auto seg_split = learn::stratified_split(seg_labels, ratios, seed);
  auto add = [&](const std::vector<std::size_t>& segs, std::vector<std::size_t>& out) {
    for (auto s : segs)
      for (auto& w : learn::segment_windows(segments[s], window)) {
        out.push_back(d.windows.size());
        d.labels.push_back(w.label);
        d.windows.push_back(std::move(w));
      }
  };
  add(seg_split.train, d.split.train);
  add(seg_split.val, d.split.val);
  add(seg_split.test, d.split.test);
  return d;
}

struct ModelShapes {
  int hidden1 = 512;
  int hidden2 = 256;
  int lstm_hidden = 128;
  int head_hidden = 128;
};

inline ModelShapes shapes_of(const PipelineConfig::Learn& l) { return {l.hidden1, l.hidden2, l.lstm_hidden, l.head_hidden}; }

struct TrainOutcome {
  learn::Checkpoint checkpoint;
  learn::TrainResult result;
};

/// Trains the configured model on the training part of `data` with class
/// weights from the training labels, early-stopping on the validation part.
inline TrainOutcome train_on(const PreparedData& data, const ModelShapes& shapes, const learn::TrainConfig& tc,
                             const learn::WindowConfig& window) {
  const int C = static_cast<int>(data.class_names.size());
  const auto train_labels = learn::gather(data.labels, data.split.train);
  const auto weights = learn::class_weights(learn::count_labels(train_labels, C));
  const auto d = static_cast<int>(data.features.cols());

  io::json echo{{"model", learn::to_string(data.kind)},
                {"class_names", data.class_names},
                {"seed", tc.seed},
                {"split", {tc.split[0], tc.split[1], tc.split[2]}},
                {"window", {{"length", window.length}, {"stride", window.stride}, {"majority_floor", window.majority_floor}}},
                {"learning_rate", tc.adam.learning_rate},
                {"weight_decay", tc.adam.weight_decay},
                {"max_epochs", tc.max_epochs},
                {"patience", tc.patience},
                {"batch_size", tc.batch_size}};

  TrainOutcome out;
  if (data.kind == learn::ModelKind::mlp) {
    const learn::MlpShape shape{d, shapes.hidden1, shapes.hidden2, C, 0.5};
    auto init = learn::init_mlp(shape, learn::mix_seed(tc.seed, 0xA11CE));
    const auto prob = learn::mlp_problem(shape, data.features, data.labels, weights);
    out.result = learn::train(prob, init.values, data.split.train, data.split.val, tc);
    init.values = out.result.best_params;
    echo["best_epoch"] = out.result.best_epoch;
    out.checkpoint = learn::make_checkpoint(init, echo);
  } else {
    const learn::BiLstmShape shape{d, shapes.lstm_hidden, shapes.head_hidden, C, 0.3};
    auto init = learn::init_bilstm(shape, learn::mix_seed(tc.seed, 0xA11CE));
    const auto prob = learn::bilstm_problem(shape, data.features, data.windows, weights);
    out.result = learn::train(prob, init.values, data.split.train, data.split.val, tc);
    init.values = out.result.best_params;
    echo["best_epoch"] = out.result.best_epoch;
    out.checkpoint = learn::make_checkpoint(init, echo);
  }
  return out;
}

/// Predicted class per example index, in eval mode.
inline std::vector<int> predict(const learn::Checkpoint& ck, const PreparedData& data,
                                std::span<const std::size_t> idx) {
  std::vector<int> out;
  constexpr std::size_t kBatch = 256;
  for (std::size_t at = 0; at < idx.size(); at += kBatch) {
    const auto batch = idx.subspan(at, std::min(kBatch, idx.size() - at));
    learn::MatrixXd logits;
    if (ck.kind == learn::ModelKind::mlp) {
      const auto p = learn::mlp_from_checkpoint(ck);
      learn::MatrixXd x(static_cast<learn::Index>(batch.size()), data.features.cols());
      for (std::size_t i = 0; i < batch.size(); ++i)
        x.row(static_cast<learn::Index>(i)) = data.features.row(static_cast<learn::Index>(batch[i]));
      logits = learn::mlp_forward(p, x, learn::Mode::eval);
    } else {
      const auto p = learn::bilstm_from_checkpoint(ck);
      logits = learn::bilstm_forward(p, learn::window_batch(data.features, data.windows, batch), learn::Mode::eval);
    }
    const auto pred = learn::argmax_rows(logits);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

/// Rebuilds the partition recorded in the checkpoint and scores one part.
inline learn::ClassificationReport evaluate_checkpoint(const learn::Checkpoint& ck, const EmbeddingStore& store,
                                                       const std::string& part = "test") {
  const auto& c = ck.config;
  if (!c.contains("class_names") || !c.contains("seed"))
    throw Error(Errc::format, "checkpoint carries no training config echo");
  learn::WindowConfig window;
  if (c.contains("window")) {
    window.length = c["window"].value("length", window.length);
    window.stride = c["window"].value("stride", window.stride);
    window.majority_floor = c["window"].value("majority_floor", window.majority_floor);
  }
  learn::SplitRatios ratios = learn::kDefaultSplit;
  if (c.contains("split")) {
    const auto s = c["split"].get<std::vector<double>>();
    ratios = {s.at(0), s.at(1), s.at(2)};
  }
  const auto data = prepare_data(store, ck.kind, c["class_names"].get<std::vector<std::string>>(), window, ratios,
                                 c["seed"].get<std::uint64_t>());
  if (ck.shape.empty() || ck.shape[0] != data.features.cols())
    throw Error(Errc::store_inconsistent, "checkpoint input dim does not match the store dim " +
                                              std::to_string(data.features.cols()));
  const std::vector<std::size_t>* idx = nullptr;
  if (part == "train") idx = &data.split.train;
  else if (part == "val") idx = &data.split.val;
  else if (part == "test") idx = &data.split.test;
  else throw Error(Errc::invalid_config, "split must be train, val or test");
  const auto truth = learn::gather(data.labels, *idx);
  const auto pred = predict(ck, data, *idx);
  return learn::evaluate_classifier(truth, pred, static_cast<int>(data.class_names.size()), data.class_names);
}

inline void write_history(const fs::path& path, const learn::TrainResult& r) {
  std::vector<io::json> rows;
  for (const auto& e : r.history)
    rows.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy}});
  io::write_jsonl(path, rows);
}

// ---- evaluation inputs -------------------------------------------------

/// Ground-truth boxes per frame from either a detections file or a track file.
inline GtFrames read_gt_boxes(const fs::path& path) {
  GtFrames out;
  const auto rows = io::read_jsonl(path);
  const bool is_tracks = !rows.empty() && rows.front().contains("tracker_id");
  if (is_tracks) {
    const auto run = io::track_run_from_records(rows);
    for (const auto& t : run.trajectories)
      for (const auto& [f, e] : t.entries) out[f].push_back(e.box);
  } else {
    for (const auto& r : rows) {
      const auto d = io::detection_from(r);
      out[d.frame].push_back(d.box);
    }
  }
  return out;
}

inline void write_report(const fs::path& dir, const std::string& stem, const io::json& j, const std::string& table) {
  io::write_text(dir / (stem + ".json"), j.dump(2) + "\n");
  io::write_text(dir / (stem + ".txt"), table);
}

}  // namespace herdpipe
