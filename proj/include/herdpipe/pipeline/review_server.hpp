#pragma once

#include <filesystem>
#include <mutex>
#include <string>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/geometry.hpp"
#include "herdpipe/ingest.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/io/image_io.hpp"
#include "herdpipe/pipeline/stages.hpp"

#include <httplib.h>

namespace herdpipe {

/// HTTP endpoints backing the seed-review client:
///   GET  /frame/<global index>  frame as PNG
///   GET  /candidates[?frame=N]  detections on the seed frame (JSONL)
///   GET  /seeds                 current seeds file (JSONL)
///   POST /seeds                 replace seeds; stored as human_reviewed
/// Bodies use the on-disk record schemas.
class ReviewServer {
 public:
  explicit ReviewServer(fs::path root) : paths_{std::move(root)} {
    svr_.Get(R"(/frame/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { get_frame(std::stoll(req.matches[1].str()), res); });
    });
    svr_.Get("/candidates", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { get_candidates(req, res); });
    });
    svr_.Get("/seeds", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        if (!fs::exists(paths_.seeds())) throw Error(Errc::dependency, "no seeds file yet");
        res.set_content(io::read_text(paths_.seeds()), "application/jsonl");
      });
    });
    svr_.Post("/seeds", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { post_seeds(req.body, res); });
    });
  }

  /// Binds to `port` (0 = any free port) on localhost; returns the bound port.
  int bind(int port = 0, const std::string& host = "127.0.0.1") {
    if (port == 0) return svr_.bind_to_any_port(host);
    if (!svr_.bind_to_port(host, port)) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
  }
  bool listen_after_bind() { return svr_.listen_after_bind(); }
  void stop() { svr_.stop(); }
  void wait_until_ready() { svr_.wait_until_ready(); }

 private:
  template <class F>
  void guarded(httplib::Response& res, F&& f) {
    std::lock_guard lock(mutex_);
    try {
      f();
    } catch (const Error& e) {
      const auto code = e.code();
      res.status = code == Errc::dependency ? 404 : (code == Errc::io ? 500 : 400);
      res.set_content(io::json{{"error", std::string(to_string(code))}, {"message", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(io::json{{"error", "internal"}, {"message", e.what()}}.dump(), "application/json");
    }
  }

  const SequenceLayout& layout() {
    if (!layout_) layout_ = read_layout(paths_.root);
    return *layout_;
  }

  void get_frame(FrameIndex idx, httplib::Response& res) {
    const auto ref = layout().find(idx);
    if (!ref) throw Error(Errc::dependency, "frame " + std::to_string(idx) + " is not in the layout");
    const auto png = io::encode_image(io::read_image(layout().frame_path(*ref)), io::ImageFormat::png);
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void get_candidates(const httplib::Request& req, httplib::Response& res) {
    if (!fs::exists(paths_.detections())) throw Error(Errc::dependency, "no detections in the layout");
    FrameIndex frame = layout().frames.empty() ? 1 : layout().frames.front().frame.global_index;
    if (req.has_param("frame")) frame = std::stoll(req.get_param_value("frame"));
    std::vector<io::json> rows;
    for (const auto& d : io::read_detections(paths_.detections()))
      if (d.frame == frame) rows.push_back(io::to_json(d));
    res.set_content(io::dump_jsonl(rows), "application/jsonl");
  }

  void post_seeds(const std::string& body, httplib::Response& res) {
    auto rows = io::parse_jsonl(body, "request body");
    for (auto& r : rows) r["provenance"] = to_string(Provenance::human_reviewed);
    if (rows.empty()) throw Error(Errc::no_seeds, "refusing to save an empty seed list");
    auto seeds = io::seeds_from_records(rows);
    if (seeds.seeds.empty()) throw Error(Errc::no_seeds, "refusing to save an empty seed list");
    const auto ref = layout().find(seeds.frame);
    if (!ref) throw Error(Errc::invalid_input, "seed frame " + std::to_string(seeds.frame) + " is not in the layout");
    const auto img = io::read_image(layout().frame_path(*ref));
    for (const auto& s : seeds.seeds) {
      validate(s.box);
      if (s.box.x < 0 || s.box.y < 0 || s.box.right() > img.width || s.box.bottom() > img.height)
        throw Error(Errc::invalid_geometry, "seed " + s.object_name + " " + describe(s.box) + " leaves the frame");
    }
    seeds.provenance = Provenance::human_reviewed;
    io::write_seeds(paths_.seeds(), seeds);
    res.set_content(io::read_text(paths_.seeds()), "application/jsonl");
  }

  LayoutPaths paths_;
  httplib::Server svr_;
  std::mutex mutex_;
  std::optional<SequenceLayout> layout_;
};

}  // namespace herdpipe
