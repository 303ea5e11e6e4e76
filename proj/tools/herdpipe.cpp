#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <opencv2/imgproc.hpp>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/log.hpp"
#include "herdpipe/embed/tsne.hpp"
#include "herdpipe/pipeline/config.hpp"
#include "herdpipe/pipeline/overlay.hpp"
#include "herdpipe/pipeline/review_server.hpp"
#include "herdpipe/pipeline/run.hpp"
#include "herdpipe/pipeline/stages.hpp"
#include "herdpipe/pipeline/synthetic.hpp"
#include "herdpipe/report.hpp"

namespace fs = std::filesystem;
using namespace herdpipe;

namespace {

struct Common {
  std::string config;
  std::string root;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "pipeline configuration (JSON)");
  app->add_option("--root", c.root, "layout root (overrides paths.root)");
}

PipelineConfig config_for(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? parse_config(io::json::object()) : load_config(c.config);
  if (!c.root.empty()) cfg.paths.root = c.root;
  apply_environment(cfg);
  return cfg;
}

void print_file(const fs::path& p) { std::cout << io::read_text(p); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Scatter plot of a 2-D projection, one seeded color per label.
RgbImage scatter_plot(const Eigen::MatrixXd& pts, const std::vector<std::string>& labels, int size = 640) {
  RgbImage img(size, size, kWhite);
  cv::Mat m = io::to_mat(img);
  const Eigen::Vector2d lo = pts.colwise().minCoeff(), hi = pts.colwise().maxCoeff();
  std::vector<std::string> names(labels);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const auto palette = make_palette(names.size(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double u = (pts(i, 0) - lo[0]) / std::max(hi[0] - lo[0], 1e-12);
    const double v = (pts(i, 1) - lo[1]) / std::max(hi[1] - lo[1], 1e-12);
    const auto k = std::lower_bound(names.begin(), names.end(), labels[std::size_t(i)]) - names.begin();
    const Rgb c = palette[std::size_t(k)];
    cv::circle(m, cv::Point(int(20 + u * (size - 40)), int(20 + (1 - v) * (size - 40))), 3, cv::Scalar(c[2], c[1], c[0]),
               cv::FILLED);
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Rgb c = palette[k];
    cv::putText(m, names[k].empty() ? "(unlabeled)" : names[k], cv::Point(10, 16 + 14 * int(k)),
                cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(c[2], c[1], c[0]), 1);
  }
  return io::from_mat(m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"herdpipe: animal behavior video pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // ingest
  Common ingest_c;
  std::string ingest_source;
  auto* ingest_cmd = app.add_subcommand("ingest", "sample and chunk a video or frame directory");
  add_common(ingest_cmd, ingest_c);
  std::optional<std::int64_t> ingest_stride, ingest_max_chunk;
  std::string ingest_out, ingest_decoder;
  ingest_cmd->add_option("--source", ingest_source, "video file or frame directory (overrides paths.source)");
  ingest_cmd->add_option("--stride", ingest_stride, "keep every n-th frame");
  ingest_cmd->add_option("--max-chunk", ingest_max_chunk, "frames per chunk");
  ingest_cmd->add_option("--out", ingest_out, "layout root (overrides paths.root)");
  ingest_cmd->add_option("--decoder-cmd", ingest_decoder, "video decoder command template");

  // detect-ingest
  Common di_c;
  std::string di_file;
  auto* di_cmd = app.add_subcommand("detect-ingest", "import an external detector's detections into the layout");
  add_common(di_cmd, di_c);
  di_cmd->add_option("--detections", di_file, "detections JSONL (overrides paths.detections)");

  // detect-filter
  Common df_c;
  std::optional<double> df_threshold;
  std::string df_labels;
  auto* df_cmd = app.add_subcommand("detect-filter", "filter first-frame detections into tracking seeds");
  add_common(df_cmd, df_c);
  df_cmd->add_option("--threshold", df_threshold, "score threshold (overrides detect.threshold)");
  df_cmd->add_option("--labels", df_labels, "comma-separated target labels (overrides detect.labels)");

  // review-serve
  Common rs_c;
  int rs_port = 8080;
  auto* rs_cmd = app.add_subcommand("review-serve", "serve frames, candidates and seeds for review");
  add_common(rs_cmd, rs_c);
  rs_cmd->add_option("--port", rs_port, "localhost port (0 = any)");

  // track
  Common tr_c;
  std::string tr_kind, tr_seeds, tr_layout, tr_out;
  auto* tr_cmd = app.add_subcommand("track", "track seeded identities across all chunks");
  add_common(tr_cmd, tr_c);
  tr_cmd->add_option("--tracker", tr_kind, "external, naive or oracle")->check(CLI::IsMember({"external", "naive", "oracle"}));
  tr_cmd->add_option("--seeds", tr_seeds, "seeds file");
  tr_cmd->add_option("--layout", tr_layout, "layout root");
  tr_cmd->add_option("--out", tr_out, "output track file");

  // crop
  Common cr_c;
  std::string cr_layout, cr_tracks, cr_labels, cr_bg;
  std::optional<int> cr_size, cr_workers;
  auto* cr_cmd = app.add_subcommand("crop", "crop every tracked instance");
  add_common(cr_cmd, cr_c);
  cr_cmd->add_option("--layout", cr_layout, "layout root");
  cr_cmd->add_option("--tracks", cr_tracks, "track file");
  cr_cmd->add_option("--labels", cr_labels, "sparse behavior labels");
  cr_cmd->add_option("--bg", cr_bg, "background: black or white")->check(CLI::IsMember({"black", "white"}));
  cr_cmd->add_option("--size", cr_size, "square crop side in pixels");
  cr_cmd->add_option("--workers", cr_workers, "worker threads");

  // embed
  Common em_c;
  std::string em_kind, em_crops, em_out;
  auto* em_cmd = app.add_subcommand("embed", "embed crops into an embedding store");
  add_common(em_cmd, em_c);
  em_cmd->add_option("--embedder", em_kind, "toy or external")->check(CLI::IsMember({"toy", "external"}));
  em_cmd->add_option("--crops", em_crops, "crop directory");
  em_cmd->add_option("--out", em_out, "embedding store directory");

  // train
  Common tn_c;
  std::string tn_model = "", tn_store, tn_labels, tn_out;
  auto* tn_cmd = app.add_subcommand("train", "train a behavior classifier on an embedding store");
  add_common(tn_cmd, tn_c);
  tn_cmd->add_option("--model", tn_model, "mlp or bilstm (overrides learn.model)");
  tn_cmd->add_option("--store", tn_store, "embedding store directory");
  tn_cmd->add_option("--labels", tn_labels, "behavior labels per (frame, identity) replacing the store's");
  tn_cmd->add_option("--out", tn_out, "model checkpoint path");

  // eval-det
  Common ed_c;
  std::string ed_gt, ed_dets, ed_out;
  std::optional<double> ed_iou, ed_score;
  auto* ed_cmd = app.add_subcommand("eval-det", "score detections against ground truth");
  add_common(ed_cmd, ed_c);
  ed_cmd->add_option("--gt", ed_gt, "ground-truth detections or track file");
  ed_cmd->add_option("--detections,--det", ed_dets, "detections to score");
  ed_cmd->add_option("--iou", ed_iou, "IoU threshold");
  ed_cmd->add_option("--score-threshold", ed_score, "operating score threshold");
  ed_cmd->add_option("--out,--report", ed_out, "report directory");

  // eval-mot
  Common mo_c;
  std::vector<std::string> mo_gt, mo_pred, mo_names;
  std::optional<double> mo_iou;
  std::string mo_out;
  auto* mo_cmd = app.add_subcommand("eval-mot", "MOT metrics for one or more sequences");
  add_common(mo_cmd, mo_c);
  mo_cmd->add_option("--gt", mo_gt, "ground-truth track file (repeat per sequence)");
  mo_cmd->add_option("--pred", mo_pred, "predicted track file (repeat per sequence)");
  mo_cmd->add_option("--name", mo_names, "sequence name (repeat per sequence)");
  mo_cmd->add_option("--iou", mo_iou, "IoU threshold");
  mo_cmd->add_option("--out", mo_out, "report directory");

  // eval-cls
  Common ec_c;
  std::string ec_model, ec_store, ec_split = "test", ec_out;
  auto* ec_cmd = app.add_subcommand("eval-cls", "classification report for a trained model");
  add_common(ec_cmd, ec_c);
  ec_cmd->add_option("--model", ec_model, "model checkpoint");
  ec_cmd->add_option("--store", ec_store, "embedding store directory");
  ec_cmd->add_option("--split", ec_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ec_cmd->add_option("--out", ec_out, "report directory");

  // tsne
  Common ts_c;
  std::string ts_store, ts_labels, ts_out, ts_png;
  TsneConfig ts_cfg;
  auto* ts_cmd = app.add_subcommand("tsne", "2-D t-SNE projection of an embedding store");
  add_common(ts_cmd, ts_c);
  ts_cmd->add_option("--store", ts_store, "embedding store directory");
  ts_cmd->add_option("--labels", ts_labels, "behavior labels per (frame, identity) replacing the store's");
  ts_cmd->add_option("--out", ts_out, "output CSV: crop_filename,label,x,y")->required();
  ts_cmd->add_option("--png", ts_png, "optional scatter plot");
  ts_cmd->add_option("--perplexity", ts_cfg.perplexity, "perplexity");
  ts_cmd->add_option("--iterations", ts_cfg.iterations, "iterations");
  std::optional<std::uint64_t> ts_seed;
  ts_cmd->add_option("--seed", ts_seed, "seed (defaults to the config seed)");

  // overlay
  Common ov_c;
  FrameIndex ov_frame = 1;
  std::string ov_tracks, ov_seeds, ov_dets, ov_out;
  std::uint64_t ov_palette = 1;
  auto* ov_cmd = app.add_subcommand("overlay", "draw boxes and masks over a frame");
  add_common(ov_cmd, ov_c);
  ov_cmd->add_option("--frame", ov_frame, "global frame index");
  ov_cmd->add_option("--tracks", ov_tracks, "track file");
  ov_cmd->add_option("--seeds", ov_seeds, "seeds file");
  ov_cmd->add_option("--detections", ov_dets, "detections file");
  ov_cmd->add_option("--palette-seed", ov_palette, "palette seed");
  ov_cmd->add_option("--out", ov_out, "output PNG")->required();

  // synth
  std::string sy_out;
  int sy_objects = 4, sy_frames = 600, sy_segment = 100;
  bool sy_crossing = false;
  auto* sy_cmd = app.add_subcommand("synth", "write a scripted synthetic sequence and a config for it");
  sy_cmd->add_option("--out", sy_out, "output directory")->required();
  sy_cmd->add_option("--objects", sy_objects, "number of blobs (1-8)");
  sy_cmd->add_option("--frames", sy_frames, "number of frames");
  sy_cmd->add_option("--segment", sy_segment, "frames per behavior segment");
  sy_cmd->add_flag("--crossing", sy_crossing, "first two blobs cross paths");

  // run
  Common ru_c;
  std::string ru_stages;
  bool ru_force = false;
  auto* ru_cmd = app.add_subcommand("run", "run pipeline stages in order");
  add_common(ru_cmd, ru_c);
  ru_cmd->add_option("--stages", ru_stages, "comma-separated subset of stages");
  ru_cmd->add_flag("--force", ru_force, "rerun even when inputs are unchanged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (verbose) log::threshold() = log::Level::debug;

  try {
    if (ingest_cmd->parsed()) {
      auto cfg = config_for(ingest_c);
      if (!ingest_source.empty()) cfg.paths.source = ingest_source;
      if (!ingest_out.empty()) cfg.paths.root = ingest_out;
      if (!ingest_decoder.empty()) cfg.ingest.decoder_cmd = ingest_decoder;
      if (ingest_stride) cfg.ingest.stride = *ingest_stride;
      if (ingest_max_chunk) cfg.ingest.max_chunk = *ingest_max_chunk;
      if (cfg.ingest.stride < 1 || cfg.ingest.max_chunk < 1)
        throw Error(Errc::invalid_config, "stride and max chunk must be >= 1");
      if (cfg.paths.source.empty()) throw Error(Errc::invalid_config, "no source given (--source or paths.source)");
      const auto layout =
          ingest(cfg.paths.source,
                 IngestOptions{cfg.ingest.stride, cfg.ingest.max_chunk, cfg.ingest.decoder_cmd,
                               cfg.cache_dir.empty() ? fs::path{} : cfg.cache_dir / "decode"},
                 cfg.paths.root);
      std::cout << layout.frames.size() << " frames in " << layout.chunks().size() << " chunk(s), "
                << layout.failures.size() << " unreadable\n";
    } else if (di_cmd->parsed()) {
      auto cfg = config_for(di_c);
      if (!di_file.empty()) cfg.paths.detections = di_file;
      if (cfg.paths.detections.empty()) throw Error(Errc::invalid_config, "no detections file given");
      const auto dets = import_detections(cfg.paths.detections, LayoutPaths{cfg.paths.root}.detections());
      std::cout << dets.size() << " detections imported\n";
    } else if (df_cmd->parsed()) {
      auto cfg = config_for(df_c);
      if (df_threshold) cfg.detect.threshold = *df_threshold;
      if (!df_labels.empty()) {
        const auto v = split_list(df_labels);
        cfg.detect.labels = {v.begin(), v.end()};
      }
      const LayoutPaths lp{cfg.paths.root};
      if (!fs::exists(lp.detections()))
        throw Error(Errc::dependency, "no detections in the layout; run detect-ingest first");
      const auto seeds = detect_filter(io::read_detections(lp.detections()), read_layout(lp.root), cfg.detect, lp.seeds());
      std::cout << seeds.seeds.size() << " seeds (" << to_string(seeds.provenance) << ") at frame " << seeds.frame
                << "\n";
    } else if (rs_cmd->parsed()) {
      auto cfg = config_for(rs_c);
      ReviewServer server(cfg.paths.root);
      const int port = server.bind(rs_port);
      std::cout << "review server on http://127.0.0.1:" << port << std::endl;
      server.listen_after_bind();
    } else if (tr_cmd->parsed()) {
      auto cfg = config_for(tr_c);
      if (!tr_layout.empty()) cfg.paths.root = tr_layout;
      if (!tr_kind.empty()) cfg.track.kind = tr_kind;
      const LayoutPaths lp{cfg.paths.root};
      const fs::path seeds_path = tr_seeds.empty() ? lp.seeds() : fs::path(tr_seeds);
      const fs::path out = tr_out.empty() ? lp.tracks() : fs::path(tr_out);
      if (!fs::exists(seeds_path)) throw Error(Errc::dependency, "seeds not found: " + seeds_path.string());
      std::optional<std::vector<Detection>> dets;
      std::optional<TrackRun> gt;
      if (cfg.track.kind == "naive") {
        if (!fs::exists(lp.detections())) throw Error(Errc::dependency, "naive tracking needs detections in the layout");
        dets = io::read_detections(lp.detections());
      }
      if (cfg.track.kind == "oracle") {
        if (cfg.paths.gt_tracks.empty() || !fs::exists(cfg.paths.gt_tracks))
          throw Error(Errc::dependency, "oracle tracking needs paths.gt_tracks");
        gt = io::read_track_run(cfg.paths.gt_tracks);
      }
      const auto work = cfg.cache_dir.empty() ? lp.tracker_work() : cfg.cache_dir / "tracker";
      const auto run = track_layout(read_layout(lp.root), io::read_seeds(seeds_path), cfg, dets ? &*dets : nullptr,
                                    gt ? &*gt : nullptr, work);
      io::write_track_run(out, run);
      std::cout << run.trajectories.size() << " trajectories written to " << out.string() << "\n";
    } else if (cr_cmd->parsed()) {
      auto cfg = config_for(cr_c);
      if (!cr_layout.empty()) cfg.paths.root = cr_layout;
      if (!cr_labels.empty()) cfg.paths.labels = cr_labels;
      if (!cr_bg.empty()) cfg.crop.bg = cr_bg == "white" ? kWhite : kBlack;
      if (cr_size) cfg.crop.width = cfg.crop.height = *cr_size;
      if (cr_workers) cfg.crop.workers = *cr_workers;
      if (cfg.crop.width < 1 || cfg.crop.workers < 0) throw Error(Errc::invalid_config, "invalid crop size or workers");
      const LayoutPaths lp{cfg.paths.root};
      const fs::path tracks = cr_tracks.empty() ? lp.tracks() : fs::path(cr_tracks);
      if (!fs::exists(tracks)) throw Error(Errc::dependency, "tracks not found: " + tracks.string());
      const auto layout = read_layout(lp.root);
      const auto run = io::read_track_run(tracks);
      std::optional<LabelIndex> labels;
      if (!cfg.paths.labels.empty() && !layout.frames.empty()) {
        std::optional<TrackRun> gt;
        if (!cfg.paths.gt_tracks.empty() && fs::exists(cfg.paths.gt_tracks)) gt = io::read_track_run(cfg.paths.gt_tracks);
        labels = labels_for_run(io::read_labels(cfg.paths.labels), run, gt ? &*gt : nullptr, cfg.track.eval_iou,
                                layout.frames.front().frame.global_index, layout.frames.back().frame.global_index);
      }
      const auto m = crop_layout(layout, run, labels ? &*labels : nullptr, cfg, lp.crops());
      std::cout << m.records.size() << " crops written to " << lp.crops().string() << "\n";
    } else if (em_cmd->parsed()) {
      auto cfg = config_for(em_c);
      if (!em_kind.empty()) cfg.embed.kind = em_kind;
      const LayoutPaths lp{cfg.paths.root};
      const fs::path crops = em_crops.empty() ? lp.crops() : fs::path(em_crops);
      const fs::path out = em_out.empty() ? lp.embeddings() : fs::path(em_out);
      if (!fs::exists(crop_manifest_path(crops))) throw Error(Errc::dependency, "no crop manifest in " + crops.string());
      const auto store = embed_layout(crops, out, cfg);
      std::cout << store.rows.size() << " embeddings of dimension " << store.dim << " written to " << out.string() << "\n";
    } else if (tn_cmd->parsed()) {
      auto cfg = config_for(tn_c);
      if (!tn_model.empty()) cfg.learn.model = tn_model;
      const LayoutPaths lp{cfg.paths.root};
      auto store = load_store(tn_store.empty() ? lp.embeddings() : fs::path(tn_store));
      if (!tn_labels.empty()) {
        const auto idx = index_labels(io::read_labels(tn_labels));
        for (auto& r : store.rows) {
          auto it = idx.find({r.frame_global_index, r.identity});
          r.label = it == idx.end() ? "" : it->second;
        }
      }
      const auto kind = learn::model_kind_from(cfg.learn.model);
      const auto data = prepare_data(store, kind, {}, cfg.learn.window, cfg.learn.train.split, cfg.seed);
      const auto outcome = train_on(data, shapes_of(cfg.learn), cfg.learn.train, cfg.learn.window);
      const fs::path out = tn_out.empty() ? lp.model() : fs::path(tn_out);
      write_history(fs::path(out).replace_extension(".history.jsonl"), outcome.result);
      if (outcome.result.divergence) throw Error(Errc::divergence, *outcome.result.divergence);
      learn::write_checkpoint(out, outcome.checkpoint);
      for (const auto& e : outcome.result.history)
        std::printf("epoch %3d  train %.5f  val %.5f  val_acc %.4f\n", e.epoch, e.train_loss, e.val_loss,
                    e.val_accuracy);
      std::printf("best epoch %d of %d; %zu train / %zu val / %zu test examples; saved %s\n", outcome.result.best_epoch,
                  outcome.result.epochs_run, data.split.train.size(), data.split.val.size(), data.split.test.size(),
                  out.c_str());
    } else if (ed_cmd->parsed()) {
      auto cfg = config_for(ed_c);
      const LayoutPaths lp{cfg.paths.root};
      const fs::path gt = !ed_gt.empty() ? fs::path(ed_gt) : detail::gt_boxes_path(cfg);
      const fs::path dets = !ed_dets.empty() ? fs::path(ed_dets)
                                            : (fs::exists(lp.detections()) ? lp.detections() : cfg.paths.detections);
      if (gt.empty() || !fs::exists(gt)) throw Error(Errc::dependency, "ground truth not found: " + gt.string());
      if (dets.empty() || !fs::exists(dets)) throw Error(Errc::dependency, "detections not found: " + dets.string());
      DetectionEvalConfig ec{ed_iou.value_or(cfg.detect.iou), ed_score.value_or(cfg.detect.threshold)};
      const auto rep = evaluate_detection(read_gt_boxes(gt), io::by_frame(io::read_detections(dets)), ec);
      const fs::path out = ed_out.empty() ? cfg.reports_dir() : fs::path(ed_out);
      write_report(out, "detection", to_json(rep), render_detection_table(rep));
      print_file(out / "detection.txt");
    } else if (mo_cmd->parsed()) {
      auto cfg = config_for(mo_c);
      const LayoutPaths lp{cfg.paths.root};
      if (mo_gt.empty() && !cfg.paths.gt_tracks.empty()) mo_gt.push_back(cfg.paths.gt_tracks.string());
      if (mo_pred.empty()) mo_pred.push_back(lp.tracks().string());
      if (mo_gt.size() != mo_pred.size())
        throw Error(Errc::invalid_config, "--gt and --pred must be given the same number of times");
      if (mo_gt.empty()) throw Error(Errc::dependency, "no ground-truth tracks given");
      SequenceReports rows;
      for (std::size_t i = 0; i < mo_gt.size(); ++i) {
        for (const auto& p : {mo_gt[i], mo_pred[i]})
          if (!fs::exists(p)) throw Error(Errc::dependency, "track file not found: " + p);
        const std::string name = i < mo_names.size() ? mo_names[i] : fs::path(mo_pred[i]).stem().string();
        rows.emplace_back(name, evaluate_mot(io::read_track_run(mo_gt[i]), io::read_track_run(mo_pred[i]),
                                             mo_iou.value_or(cfg.track.eval_iou)));
      }
      const fs::path out = mo_out.empty() ? cfg.reports_dir() : fs::path(mo_out);
      write_report(out, "mot", to_json(rows), render_mot_table(rows));
      print_file(out / "mot.txt");
    } else if (ec_cmd->parsed()) {
      auto cfg = config_for(ec_c);
      const LayoutPaths lp{cfg.paths.root};
      const fs::path model = ec_model.empty() ? lp.model() : fs::path(ec_model);
      if (!fs::exists(model)) throw Error(Errc::dependency, "model not found: " + model.string());
      const auto ck = learn::read_checkpoint(model);
      const auto rep = evaluate_checkpoint(ck, load_store(ec_store.empty() ? lp.embeddings() : fs::path(ec_store)), ec_split);
      auto j = to_json(rep);
      j["model"] = learn::to_string(ck.kind);
      j["split"] = ec_split;
      const fs::path out = ec_out.empty() ? cfg.reports_dir() : fs::path(ec_out);
      write_report(out, "classification", j, render_classification_table(rep));
      print_file(out / "classification.txt");
      std::printf("accuracy %.4f\n", rep.accuracy);
    } else if (ts_cmd->parsed()) {
      auto cfg = config_for(ts_c);
      ts_cfg.seed = ts_seed.value_or(cfg.seed);
      auto store = load_store(ts_store.empty() ? LayoutPaths{cfg.paths.root}.embeddings() : fs::path(ts_store));
      if (!ts_labels.empty()) {
        const auto idx = index_labels(io::read_labels(ts_labels));
        for (auto& r : store.rows) {
          auto it = idx.find({r.frame_global_index, r.identity});
          r.label = it == idx.end() ? "" : it->second;
        }
      }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(store.rows.size()), static_cast<Eigen::Index>(store.dim));
      for (std::size_t i = 0; i < store.rows.size(); ++i)
        for (std::size_t k = 0; k < store.dim; ++k) x(Eigen::Index(i), Eigen::Index(k)) = store.vectors[i][k];
      const auto res = tsne(x, ts_cfg);
      std::ostringstream csv;
      csv.precision(17);
      csv << "crop_filename,label,x,y\n";
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < store.rows.size(); ++i) {
        csv << store.rows[i].crop_filename << "," << store.rows[i].label << "," << res.points(Eigen::Index(i), 0) << ","
            << res.points(Eigen::Index(i), 1) << "\n";
        labels.push_back(store.rows[i].label);
      }
      io::write_text(ts_out, csv.str());
      if (!ts_png.empty()) io::write_image(ts_png, scatter_plot(res.points, labels), io::ImageFormat::png);
      std::printf("KL %.4f -> %.4f over %zu points\n", res.kl_initial, res.kl_final, store.rows.size());
    } else if (ov_cmd->parsed()) {
      auto cfg = config_for(ov_c);
      const auto layout = read_layout(cfg.paths.root);
      const auto ref = layout.find(ov_frame);
      if (!ref) throw Error(Errc::invalid_input, "frame " + std::to_string(ov_frame) + " is not in the layout");
      std::vector<OverlayItem> items;
      if (!ov_tracks.empty())
        for (const auto& t : io::read_track_run(ov_tracks).trajectories)
          if (auto it = t.entries.find(ov_frame); it != t.entries.end())
            items.push_back({t.identity, it->second.box, it->second.mask, std::nullopt});
      if (!ov_seeds.empty())
        for (const auto& s : io::read_seeds(ov_seeds).seeds) items.push_back({s.object_name, s.box, std::nullopt, std::nullopt});
      if (!ov_dets.empty())
        for (const auto& d : io::read_detections(ov_dets))
          if (d.frame == ov_frame) items.push_back({d.label, d.box, std::nullopt, d.score});
      io::write_image(ov_out, render_overlay(io::read_image(layout.frame_path(*ref)), items, ov_palette),
                      io::ImageFormat::png);
      std::cout << items.size() << " annotations drawn to " << ov_out << "\n";
    } else if (sy_cmd->parsed()) {
      const fs::path out = fs::absolute(sy_out);
      const auto truth = write_synthetic(default_scene(sy_objects, sy_frames, sy_crossing, sy_segment), out);
      const io::json cfg{{"seed", 7},
                         {"paths",
                          {{"root", "layout"},
                           {"source", "frames"},
                           {"detections", "gt_detections.jsonl"},
                           {"gt_tracks", "gt_tracks.jsonl"},
                           {"labels", "labels.jsonl"}}},
                         {"detect", {{"labels", {"pig"}}, {"threshold", 0.5}}},
                         {"track", {{"kind", "naive"}, {"iou_floor", 0.3}}},
                         {"crop", {{"width", 64}, {"height", 64}}},
                         {"embed", {{"kind", "toy"}}},
                         {"learn", {{"model", "mlp"}}}};
      io::write_text(out / "config.json", cfg.dump(2) + "\n");
      std::cout << truth.tracks.trajectories.size() << " blobs, " << sy_frames << " frames written to " << out.string()
                << "\n";
    } else if (ru_cmd->parsed()) {
      auto cfg = config_for(ru_c);
      const auto v = split_list(ru_stages);
      const auto recs = run_pipeline(cfg, RunOptions{{v.begin(), v.end()}, ru_force});
      for (const auto& r : recs) std::cout << r.stage << ": " << r.status << "\n";
    }
  } catch (const Error& e) {
    log::error(e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log::error(e.what());
    return 4;
  }
  return 0;
}
