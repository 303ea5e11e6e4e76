#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/image.hpp"
#include "herdpipe/crop.hpp"
#include "herdpipe/ingest.hpp"
#include "herdpipe/io/files.hpp"
#include "herdpipe/io/jsonl.hpp"
#include "herdpipe/learn/checkpoint.hpp"
#include "herdpipe/learn/train.hpp"
#include "herdpipe/learn/windows.hpp"

namespace herdpipe {

namespace fs = std::filesystem;

/// Everything a pipeline run needs, read from one JSON file. Relative paths
/// resolve against the config file's directory.
struct PipelineConfig {
  std::uint64_t seed = 7;
  /// Scratch space for decoding and tracker exchange files; not a config
  /// key, set from HERDPIPE_CACHE_DIR. Empty = inside the layout root.
  fs::path cache_dir;

  struct Paths {
    fs::path root = "layout";  // sequence layout and all stage outputs
    fs::path source;           // video file or frame directory
    fs::path detections;       // candidate detections from an external detector
    fs::path gt_tracks;        // optional ground-truth trajectories
    fs::path gt_detections;    // optional ground-truth boxes (defaults to gt_tracks)
    fs::path labels;           // sparse behavior annotations
    fs::path reports;          // defaults to <root>/reports
  } paths;

  struct Ingest {
    std::int64_t stride = 1;
    std::int64_t max_chunk = kDefaultMaxChunk;
    std::string decoder_cmd;
  } ingest;

  struct Detect {
    std::set<std::string> labels{"pig"};
    double threshold = 0.5;
    double iou = 0.5;
    std::string prefix = "pig";
  } detect;

  struct Track {
    std::string kind = "naive";  // naive | oracle | external
    std::string cmd;
    double iou_floor = 0.3;
    int chain_frames = 1;
    double eval_iou = 0.5;
  } track;

  struct Crop {
    Rgb bg = kBlack;
    int width = 224;
    int height = 224;
    int workers = 0;  // 0 = cores - 2, at least 1
    std::string format = "jpg";
  } crop;

  struct Embed {
    std::string kind = "toy";  // toy | external
    std::string cmd;
    int dim = 1024;
  } embed;

  struct Learn {
    std::string model = "mlp";
    learn::TrainConfig train;
    learn::WindowConfig window;
    int hidden1 = 512;
    int hidden2 = 256;
    int lstm_hidden = 128;
    int head_hidden = 128;
  } learn;

  fs::path reports_dir() const { return paths.reports.empty() ? paths.root / "reports" : paths.reports; }
};

namespace detail {

inline void reject_unknown(const io::json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw Error(Errc::invalid_config, where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw Error(Errc::invalid_config, "unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read_opt(const io::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const io::json::exception&) {
    throw Error(Errc::invalid_config, where + "." + key + " has the wrong type");
  }
}

inline Rgb parse_color(const io::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "black") return kBlack;
    if (s == "white") return kWhite;
    throw Error(Errc::invalid_config, "crop.bg must be black, white or [r,g,b]");
  }
  if (j.is_array() && j.size() == 3) {
    Rgb c{};
    for (int k = 0; k < 3; ++k) {
      const int v = j[static_cast<std::size_t>(k)].get<int>();
      if (v < 0 || v > 255) throw Error(Errc::invalid_config, "crop.bg channel out of range");
      c[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v);
    }
    return c;
  }
  throw Error(Errc::invalid_config, "crop.bg must be black, white or [r,g,b]");
}

}  // namespace detail

inline PipelineConfig parse_config(const io::json& j, const fs::path& base_dir = {}) {
  using detail::read_opt;
  detail::reject_unknown(j, "config", {"seed", "paths", "ingest", "detect", "track", "crop", "embed", "learn"});
  PipelineConfig c;
  read_opt(j, "seed", c.seed, "config");
  auto path = [&](const io::json& obj, const char* key, fs::path& out) {
    std::string s;
    read_opt(obj, key, s, "paths");
    if (s.empty()) return;
    out = fs::path(s).is_absolute() || base_dir.empty() ? fs::path(s) : base_dir / s;
  };
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    detail::reject_unknown(p, "paths", {"root", "source", "detections", "gt_tracks", "gt_detections", "labels", "reports"});
    path(p, "root", c.paths.root);
    path(p, "source", c.paths.source);
    path(p, "detections", c.paths.detections);
    path(p, "gt_tracks", c.paths.gt_tracks);
    path(p, "gt_detections", c.paths.gt_detections);
    path(p, "labels", c.paths.labels);
    path(p, "reports", c.paths.reports);
  } else if (!base_dir.empty()) {
    c.paths.root = base_dir / c.paths.root;
  }
  if (j.contains("ingest")) {
    const auto& s = j["ingest"];
    detail::reject_unknown(s, "ingest", {"stride", "max_chunk", "decoder_cmd"});
    read_opt(s, "stride", c.ingest.stride, "ingest");
    read_opt(s, "max_chunk", c.ingest.max_chunk, "ingest");
    read_opt(s, "decoder_cmd", c.ingest.decoder_cmd, "ingest");
  }
  if (j.contains("detect")) {
    const auto& s = j["detect"];
    detail::reject_unknown(s, "detect", {"labels", "threshold", "iou", "prefix"});
    read_opt(s, "labels", c.detect.labels, "detect");
    read_opt(s, "threshold", c.detect.threshold, "detect");
    read_opt(s, "iou", c.detect.iou, "detect");
    read_opt(s, "prefix", c.detect.prefix, "detect");
  }
  if (j.contains("track")) {
    const auto& s = j["track"];
    detail::reject_unknown(s, "track", {"kind", "cmd", "iou_floor", "chain_frames", "eval_iou"});
    read_opt(s, "kind", c.track.kind, "track");
    read_opt(s, "cmd", c.track.cmd, "track");
    read_opt(s, "iou_floor", c.track.iou_floor, "track");
    read_opt(s, "chain_frames", c.track.chain_frames, "track");
    read_opt(s, "eval_iou", c.track.eval_iou, "track");
  }
  if (j.contains("crop")) {
    const auto& s = j["crop"];
    detail::reject_unknown(s, "crop", {"bg", "width", "height", "workers", "format"});
    if (s.contains("bg")) c.crop.bg = detail::parse_color(s["bg"]);
    read_opt(s, "width", c.crop.width, "crop");
    read_opt(s, "height", c.crop.height, "crop");
    read_opt(s, "workers", c.crop.workers, "crop");
    read_opt(s, "format", c.crop.format, "crop");
  }
  if (j.contains("embed")) {
    const auto& s = j["embed"];
    detail::reject_unknown(s, "embed", {"kind", "cmd", "dim"});
    read_opt(s, "kind", c.embed.kind, "embed");
    read_opt(s, "cmd", c.embed.cmd, "embed");
    read_opt(s, "dim", c.embed.dim, "embed");
  }
  if (j.contains("learn")) {
    const auto& s = j["learn"];
    detail::reject_unknown(s, "learn",
                           {"model", "learning_rate", "weight_decay", "beta1", "beta2", "epsilon", "max_epochs",
                            "patience", "batch_size", "split", "window", "stride", "majority_floor", "hidden1",
                            "hidden2", "lstm_hidden", "head_hidden"});
    auto& t = c.learn.train;
    read_opt(s, "model", c.learn.model, "learn");
    read_opt(s, "learning_rate", t.adam.learning_rate, "learn");
    read_opt(s, "weight_decay", t.adam.weight_decay, "learn");
    read_opt(s, "beta1", t.adam.beta1, "learn");
    read_opt(s, "beta2", t.adam.beta2, "learn");
    read_opt(s, "epsilon", t.adam.epsilon, "learn");
    read_opt(s, "max_epochs", t.max_epochs, "learn");
    read_opt(s, "patience", t.patience, "learn");
    read_opt(s, "batch_size", t.batch_size, "learn");
    if (s.contains("split")) {
      std::vector<double> split;
      read_opt(s, "split", split, "learn");
      if (split.size() != 3) throw Error(Errc::invalid_config, "learn.split needs three ratios");
      t.split = {split[0], split[1], split[2]};
    }
    read_opt(s, "window", c.learn.window.length, "learn");
    read_opt(s, "stride", c.learn.window.stride, "learn");
    read_opt(s, "majority_floor", c.learn.window.majority_floor, "learn");
    read_opt(s, "hidden1", c.learn.hidden1, "learn");
    read_opt(s, "hidden2", c.learn.hidden2, "learn");
    read_opt(s, "lstm_hidden", c.learn.lstm_hidden, "learn");
    read_opt(s, "head_hidden", c.learn.head_hidden, "learn");
  }
  c.learn.train.seed = c.seed;

  if (c.ingest.stride < 1) throw Error(Errc::invalid_config, "ingest.stride must be >= 1");
  if (c.ingest.max_chunk < 1) throw Error(Errc::invalid_config, "ingest.max_chunk must be >= 1");
  if (c.detect.threshold < 0.0 || c.detect.threshold > 1.0)
    throw Error(Errc::invalid_config, "detect.threshold must lie in [0,1]");
  if (c.track.kind != "naive" && c.track.kind != "oracle" && c.track.kind != "external")
    throw Error(Errc::invalid_config, "track.kind must be naive, oracle or external");
  if (c.track.chain_frames < 1) throw Error(Errc::invalid_config, "track.chain_frames must be >= 1");
  if (c.crop.width < 1 || c.crop.height < 1) throw Error(Errc::invalid_config, "crop size must be positive");
  if (c.crop.workers < 0) throw Error(Errc::invalid_config, "crop.workers must be >= 0");
  if (c.crop.format != "jpg" && c.crop.format != "png") throw Error(Errc::invalid_config, "crop.format must be jpg or png");
  if (c.embed.kind != "toy" && c.embed.kind != "external")
    throw Error(Errc::invalid_config, "embed.kind must be toy or external");
  if (c.embed.dim < 1) throw Error(Errc::invalid_config, "embed.dim must be >= 1");
  learn::model_kind_from(c.learn.model);
  const auto& sp = c.learn.train.split;
  if (std::abs(sp[0] + sp[1] + sp[2] - 1.0) > 1e-9 || sp[0] < 0 || sp[1] < 0 || sp[2] < 0)
    throw Error(Errc::invalid_config, "learn.split must be non-negative and sum to 1");
  if (!(c.learn.train.adam.learning_rate > 0.0) || c.learn.train.adam.weight_decay < 0.0)
    throw Error(Errc::invalid_config, "learn.learning_rate must be positive, weight_decay non-negative");
  if (c.learn.train.max_epochs < 1 || c.learn.train.patience < 1 || c.learn.train.batch_size < 1)
    throw Error(Errc::invalid_config, "learn.max_epochs, patience and batch_size must be >= 1");
  if (c.learn.window.length < 1 || c.learn.window.stride < 1)
    throw Error(Errc::invalid_config, "learn.window and learn.stride must be >= 1");
  return c;
}

/// Applies the one environment override the tool honors.
inline void apply_environment(PipelineConfig& c) {
  if (const char* dir = std::getenv("HERDPIPE_CACHE_DIR"); dir && *dir) c.cache_dir = dir;
}

inline PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::invalid_config, "config file " + path.string() + " not found");
  io::json j;
  try {
    j = io::json::parse(io::read_text(path));
  } catch (const io::json::parse_error& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

inline io::ImageFormat crop_format(const PipelineConfig& c) {
  return c.crop.format == "png" ? io::ImageFormat::png : io::ImageFormat::jpeg;
}

inline int crop_workers(const PipelineConfig& c) { return c.crop.workers > 0 ? c.crop.workers : default_workers(); }

}  // namespace herdpipe
