#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "herdpipe/io/digest.hpp"
#include "herdpipe/pipeline/config.hpp"
#include "herdpipe/pipeline/ledger.hpp"
#include "herdpipe/pipeline/stages.hpp"

namespace herdpipe {

inline const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{"ingest", "detect",   "track",    "crop",    "embed",
                                              "train",  "eval-det", "eval-mot", "eval-cls"};
  return order;
}

struct RunOptions {
  std::set<std::string> stages;  // empty = every stage
  bool force = false;
};

struct StagePlan {
  std::string name;
  std::vector<fs::path> inputs;  // must exist
  io::json config;               // the settings the stage depends on
  std::function<std::vector<fs::path>()> run;  // returns the outputs written
};

namespace detail {

inline std::vector<fs::path> chunk_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("chunk_", 0) == 0) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Detection> detections_in(const LayoutPaths& lp, const PipelineConfig& cfg) {
  return io::read_detections(fs::exists(lp.detections()) ? lp.detections() : cfg.paths.detections);
}

inline fs::path gt_boxes_path(const PipelineConfig& cfg) {
  return cfg.paths.gt_detections.empty() ? cfg.paths.gt_tracks : cfg.paths.gt_detections;
}

inline StagePlan plan_stage(const std::string& name, const PipelineConfig& cfg) {
  const LayoutPaths lp{cfg.paths.root};
  const auto reports = cfg.reports_dir();
  StagePlan s;
  s.name = name;
  if (name == "ingest") {
    s.inputs = {cfg.paths.source};
    s.config = {{"stride", cfg.ingest.stride}, {"max_chunk", cfg.ingest.max_chunk}, {"decoder_cmd", cfg.ingest.decoder_cmd}};
    s.run = [&cfg, lp] {
      ingest(cfg.paths.source,
             IngestOptions{cfg.ingest.stride, cfg.ingest.max_chunk, cfg.ingest.decoder_cmd,
                           cfg.cache_dir.empty() ? fs::path{} : cfg.cache_dir / "decode"},
             lp.root);
      auto outs = chunk_dirs(lp.root);
      outs.insert(outs.begin(), lp.manifest());
      return outs;
    };
  } else if (name == "detect") {
    s.inputs = {lp.manifest(), cfg.paths.detections};
    s.config = {{"labels", cfg.detect.labels}, {"threshold", cfg.detect.threshold}, {"prefix", cfg.detect.prefix}};
    s.run = [&cfg, lp] {
      const auto dets = import_detections(cfg.paths.detections, lp.detections());
      detect_filter(dets, read_layout(lp.root), cfg.detect, lp.seeds());
      return std::vector<fs::path>{lp.detections(), lp.seeds()};
    };
  } else if (name == "track") {
    s.inputs = {lp.manifest(), lp.seeds()};
    if (cfg.track.kind == "naive") s.inputs.push_back(lp.detections());
    if (cfg.track.kind == "oracle") s.inputs.push_back(cfg.paths.gt_tracks);
    s.config = {{"kind", cfg.track.kind},      {"cmd", cfg.track.cmd},
                {"iou_floor", cfg.track.iou_floor}, {"chain_frames", cfg.track.chain_frames},
                {"labels", cfg.detect.labels}, {"threshold", cfg.detect.threshold}};
    s.run = [&cfg, lp] {
      const auto layout = read_layout(lp.root);
      const auto seeds = io::read_seeds(lp.seeds());
      std::optional<std::vector<Detection>> dets;
      std::optional<TrackRun> gt;
      if (cfg.track.kind == "naive") dets = io::read_detections(lp.detections());
      if (cfg.track.kind == "oracle") gt = io::read_track_run(cfg.paths.gt_tracks);
      const auto work = cfg.cache_dir.empty() ? lp.tracker_work() : cfg.cache_dir / "tracker";
      const auto run = track_layout(layout, seeds, cfg, dets ? &*dets : nullptr, gt ? &*gt : nullptr, work);
      io::write_track_run(lp.tracks(), run);
      return std::vector<fs::path>{lp.tracks()};
    };
  } else if (name == "crop") {
    s.inputs = {lp.manifest(), lp.tracks()};
    if (!cfg.paths.labels.empty()) s.inputs.push_back(cfg.paths.labels);
    if (!cfg.paths.labels.empty() && !cfg.paths.gt_tracks.empty()) s.inputs.push_back(cfg.paths.gt_tracks);
    s.config = {{"bg", {cfg.crop.bg[0], cfg.crop.bg[1], cfg.crop.bg[2]}},
                {"size", {cfg.crop.width, cfg.crop.height}},
                {"format", cfg.crop.format},
                {"eval_iou", cfg.track.eval_iou}};
    s.run = [&cfg, lp] {
      const auto layout = read_layout(lp.root);
      const auto run = io::read_track_run(lp.tracks());
      std::optional<LabelIndex> labels;
      if (!cfg.paths.labels.empty() && !layout.frames.empty()) {
        std::optional<TrackRun> gt;
        if (!cfg.paths.gt_tracks.empty()) gt = io::read_track_run(cfg.paths.gt_tracks);
        labels = labels_for_run(io::read_labels(cfg.paths.labels), run, gt ? &*gt : nullptr, cfg.track.eval_iou,
                                layout.frames.front().frame.global_index, layout.frames.back().frame.global_index);
      }
      crop_layout(layout, run, labels ? &*labels : nullptr, cfg, lp.crops());
      return std::vector<fs::path>{lp.crops()};
    };
  } else if (name == "embed") {
    s.inputs = {crop_manifest_path(lp.crops())};
    s.config = {{"kind", cfg.embed.kind}, {"cmd", cfg.embed.cmd}, {"dim", cfg.embed.dim}};
    s.run = [&cfg, lp] {
      embed_layout(lp.crops(), lp.embeddings(), cfg);
      return std::vector<fs::path>{lp.embeddings()};
    };
  } else if (name == "train") {
    s.inputs = {store_manifest_path(lp.embeddings())};
    s.config = {{"model", cfg.learn.model},
                {"seed", cfg.seed},
                {"learning_rate", cfg.learn.train.adam.learning_rate},
                {"weight_decay", cfg.learn.train.adam.weight_decay},
                {"max_epochs", cfg.learn.train.max_epochs},
                {"patience", cfg.learn.train.patience},
                {"batch_size", cfg.learn.train.batch_size},
                {"split", {cfg.learn.train.split[0], cfg.learn.train.split[1], cfg.learn.train.split[2]}},
                {"window", {cfg.learn.window.length, cfg.learn.window.stride, cfg.learn.window.majority_floor}},
                {"hidden", {cfg.learn.hidden1, cfg.learn.hidden2, cfg.learn.lstm_hidden, cfg.learn.head_hidden}}};
    s.run = [&cfg, lp, reports] {
      const auto store = load_store(lp.embeddings());
      const auto kind = learn::model_kind_from(cfg.learn.model);
      const auto data = prepare_data(store, kind, {}, cfg.learn.window, cfg.learn.train.split, cfg.seed);
      const auto outcome = train_on(data, shapes_of(cfg.learn), cfg.learn.train, cfg.learn.window);
      write_history(reports / "train_history.jsonl", outcome.result);
      if (outcome.result.divergence) throw Error(Errc::divergence, *outcome.result.divergence);
      learn::write_checkpoint(lp.model(), outcome.checkpoint);
      return std::vector<fs::path>{lp.model(), reports / "train_history.jsonl"};
    };
  } else if (name == "eval-det") {
    s.inputs = {gt_boxes_path(cfg), fs::exists(lp.detections()) ? lp.detections() : cfg.paths.detections};
    s.config = {{"iou", cfg.detect.iou}, {"threshold", cfg.detect.threshold}};
    s.run = [&cfg, lp, reports] {
      const auto gt = read_gt_boxes(gt_boxes_path(cfg));
      const auto dets = io::by_frame(detections_in(lp, cfg));
      const auto rep = evaluate_detection(gt, dets, {cfg.detect.iou, cfg.detect.threshold});
      write_report(reports, "detection", to_json(rep), render_detection_table(rep));
      return std::vector<fs::path>{reports / "detection.json", reports / "detection.txt"};
    };
  } else if (name == "eval-mot") {
    s.inputs = {cfg.paths.gt_tracks, lp.tracks()};
    s.config = {{"iou", cfg.track.eval_iou}};
    s.run = [&cfg, lp, reports] {
      const auto rep = evaluate_mot(io::read_track_run(cfg.paths.gt_tracks), io::read_track_run(lp.tracks()),
                                    cfg.track.eval_iou);
      const SequenceReports rows{{lp.root.filename().string(), rep}};
      write_report(reports, "mot", to_json(rows), render_mot_table(rows));
      return std::vector<fs::path>{reports / "mot.json", reports / "mot.txt"};
    };
  } else if (name == "eval-cls") {
    s.inputs = {lp.model(), store_manifest_path(lp.embeddings())};
    s.run = [lp, reports] {
      const auto ck = learn::read_checkpoint(lp.model());
      const auto rep = evaluate_checkpoint(ck, load_store(lp.embeddings()), "test");
      auto j = to_json(rep);
      j["model"] = learn::to_string(ck.kind);
      write_report(reports, "classification", j, render_classification_table(rep));
      return std::vector<fs::path>{reports / "classification.json", reports / "classification.txt"};
    };
  } else {
    throw Error(Errc::invalid_config, "unknown stage '" + name + "'");
  }
  return s;
}

}  // namespace detail

/// Runs the requested stages in the fixed order. A stage whose inputs and
/// settings match its last successful run, with outputs unchanged on disk,
/// is skipped. A failing stage is recorded and halts the run.
inline std::vector<LedgerRecord> run_pipeline(const PipelineConfig& cfg, const RunOptions& opt = {}) {
  for (const auto& s : opt.stages)
    if (std::find(stage_order().begin(), stage_order().end(), s) == stage_order().end())
      throw Error(Errc::invalid_config, "unknown stage '" + s + "'");
  LayoutLock lock(cfg.paths.root);
  RunLedger ledger(LayoutPaths{cfg.paths.root}.ledger());
  std::vector<LedgerRecord> done;
  for (const auto& name : stage_order()) {
    const bool requested = opt.stages.empty() || opt.stages.count(name);
    if (!requested) continue;
    if (opt.stages.empty()) {
      if (name == "ingest" && cfg.paths.source.empty()) continue;
      if (name == "detect" && cfg.paths.detections.empty()) continue;
      if (name == "eval-det" && detail::gt_boxes_path(cfg).empty()) continue;
      if (name == "eval-mot" && cfg.paths.gt_tracks.empty()) continue;
    }
    const auto plan = detail::plan_stage(name, cfg);
    for (const auto& in : plan.inputs)
      if (in.empty() || !fs::exists(in))
        throw Error(Errc::dependency, "stage " + name + " needs " + (in.empty() ? "a path that is not configured" : in.string()));
    LedgerRecord rec;
    rec.stage = name;
    rec.inputs = digest_all(plan.inputs);
    rec.config_digest = io::sha256_hex(plan.config.dump().data(), plan.config.dump().size());
    rec.started = utc_timestamp();
    if (!opt.force && ledger.up_to_date(name, rec.inputs, rec.config_digest)) {
      rec.status = "skipped";
      rec.outputs = ledger.last_success(name)->outputs;
      rec.finished = utc_timestamp();
      ledger.append(rec);
      log::info("stage " + name + ": up to date");
      done.push_back(rec);
      continue;
    }
    log::info("stage " + name + ": running");
    try {
      rec.outputs = digest_all(plan.run());
      rec.status = "ok";
    } catch (const Error& e) {
      rec.status = "failed";
      rec.error = e.what();
      rec.finished = utc_timestamp();
      ledger.append(rec);
      throw;
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
      rec.finished = utc_timestamp();
      ledger.append(rec);
      throw Error(Errc::stage_failure, "stage " + name + ": " + e.what());
    }
    rec.finished = utc_timestamp();
    ledger.append(rec);
    done.push_back(rec);
  }
  return done;
}

}  // namespace herdpipe
