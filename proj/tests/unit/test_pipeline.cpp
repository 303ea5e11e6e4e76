#include <catch_amalgamated.hpp>

#include <cstdlib>

#include "herdpipe/pipeline/config.hpp"
#include "herdpipe/pipeline/ledger.hpp"
#include "herdpipe/pipeline/overlay.hpp"
#include "herdpipe/pipeline/run.hpp"
#include "herdpipe/pipeline/synthetic.hpp"
#include "herdpipe/report.hpp"
#include "scene_fixture.hpp"
#include "table_fixtures.hpp"
#include "test_support.hpp"

using namespace herdpipe;
using Catch::Matchers::WithinAbs;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no herdpipe::Error thrown");
  return Errc::io;
}

std::map<std::string, std::string> statuses(const std::vector<LedgerRecord>& recs) {
  std::map<std::string, std::string> m;
  for (const auto& r : recs) m[r.stage] = r.status;
  return m;
}

std::string cli() { return HERDPIPE_CLI; }

}  // namespace

// ---- config ---------------------------------------------------------------

TEST_CASE("config defaults and relative paths") {
  const auto c = parse_config(io::json{{"paths", {{"source", "frames"}, {"root", "/abs/layout"}}}}, "/base");
  CHECK(c.paths.source == fs::path("/base/frames"));
  CHECK(c.paths.root == fs::path("/abs/layout"));
  CHECK(c.ingest.max_chunk == 3000);
  CHECK(c.detect.threshold == 0.5);
  CHECK(c.detect.labels == std::set<std::string>{"pig"});
  CHECK(c.learn.train.batch_size == 64);
  CHECK(c.learn.train.patience == 10);
  CHECK(c.learn.train.adam.learning_rate == 1e-3);
  CHECK(c.crop.width == 224);
  CHECK(c.reports_dir() == fs::path("/abs/layout/reports"));
}

TEST_CASE("config rejects unknown keys, bad types and bad values") {
  CHECK(code_of([] { parse_config(io::json{{"sede", 1}}); }) == Errc::invalid_config);
  CHECK(code_of([] { parse_config(io::json{{"track", {{"knd", "naive"}}}}); }) == Errc::invalid_config);
  CHECK(code_of([] { parse_config(io::json{{"ingest", {{"stride", "two"}}}}); }) == Errc::invalid_config);
  CHECK(code_of([] { parse_config(io::json{{"ingest", {{"stride", 0}}}}); }) == Errc::invalid_config);
  CHECK(code_of([] { parse_config(io::json{{"learn", {{"split", {0.5, 0.5, 0.5}}}}}); }) == Errc::invalid_config);
  CHECK(code_of([] { parse_config(io::json{{"track", {{"kind", "magic"}}}}); }) == Errc::invalid_config);
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == Errc::invalid_config);
}

TEST_CASE("cache directory comes from the environment") {
  auto c = parse_config(io::json::object());
  ::setenv("HERDPIPE_CACHE_DIR", "/tmp/hp_cache", 1);
  apply_environment(c);
  ::unsetenv("HERDPIPE_CACHE_DIR");
  CHECK(c.cache_dir == fs::path("/tmp/hp_cache"));
}

// ---- ledger and lock ------------------------------------------------------

TEST_CASE("ledger persists records and detects stale outputs") {
  testing::TempDir tmp;
  io::write_text(tmp / "out.txt", "a");
  {
    RunLedger l(tmp / "ledger.jsonl");
    LedgerRecord r;
    r.stage = "crop";
    r.status = "ok";
    r.config_digest = "c1";
    r.inputs = {{"in", "d1"}};
    r.outputs = digest_all({tmp / "out.txt"});
    l.append(r);
  }
  RunLedger l(tmp / "ledger.jsonl");
  REQUIRE(l.records().size() == 1);
  CHECK(l.up_to_date("crop", {{"in", "d1"}}, "c1"));
  CHECK_FALSE(l.up_to_date("crop", {{"in", "d2"}}, "c1"));
  CHECK_FALSE(l.up_to_date("crop", {{"in", "d1"}}, "c2"));
  io::write_text(tmp / "out.txt", "b");
  CHECK_FALSE(l.up_to_date("crop", {{"in", "d1"}}, "c1"));
}

TEST_CASE("a second run on a locked layout is refused") {
  testing::TempDir tmp;
  LayoutLock first(tmp.path());
  CHECK(code_of([&] { LayoutLock second(tmp.path()); }) == Errc::stage_failure);
  auto cfg = parse_config(io::json::object());
  cfg.paths.root = tmp.path();
  CHECK(code_of([&] { run_pipeline(cfg, RunOptions{{"eval-cls"}, false}); }) == Errc::stage_failure);
}

// ---- synthetic scenes -----------------------------------------------------

TEST_CASE("synthetic scene has exact ground truth") {
  const auto spec = default_scene(2, 100);
  int frames = 0;
  const auto truth = render_synthetic(spec, [&](FrameIndex f, const RgbImage& img) {
    CHECK(f == ++frames);
    CHECK(img.width == 320);
  });
  CHECK(frames == 100);
  REQUIRE(truth.tracks.trajectories.size() == 2);
  for (const auto& t : truth.tracks.trajectories) {
    CHECK(t.entries.size() == 100);
    for (const auto& [f, e] : t.entries) CHECK(mask_to_bbox(*e.mask) == e.box);
  }
  CHECK(truth.dense_labels.size() == 200);
  CHECK(truth.detections.size() == 200);
}

TEST_CASE("synthetic behavior script alternates in segments") {
  const auto truth = render_synthetic(default_scene(1, 100, false, 25), [](FrameIndex, const RgbImage&) {});
  REQUIRE(truth.sparse_labels.size() == 4);
  CHECK(truth.sparse_labels[0].behavior == "resting");
  CHECK(truth.sparse_labels[1].behavior == "walking");
  CHECK(truth.sparse_labels[2].behavior == "running");
  CHECK(truth.sparse_labels[3].behavior == "resting");
  CHECK(truth.sparse_labels[3].frame == 76);
  // resting blobs do not move
  const auto& e = truth.tracks.trajectories[0].entries;
  CHECK(e.at(1).box == e.at(25).box);
  CHECK_FALSE(e.at(26).box == e.at(50).box);
}

TEST_CASE("crossing scene makes the first two blobs overlap") {
  const auto truth = render_synthetic(default_scene(2, 200, true), [](FrameIndex, const RgbImage&) {});
  const auto& a = truth.tracks.trajectories[0].entries;
  const auto& b = truth.tracks.trajectories[1].entries;
  double best = 0;
  for (FrameIndex f = 1; f <= 200; ++f) best = std::max(best, iou(a.at(f).box, b.at(f).box));
  CHECK(best > 0.5);
}

TEST_CASE("synthetic specs are validated") {
  auto spec = default_scene(2, 10);
  spec.blobs[1].x = spec.blobs[0].x;
  spec.blobs[1].y = spec.blobs[0].y;
  CHECK(code_of([&] { render_synthetic(spec, [](FrameIndex, const RgbImage&) {}); }) == Errc::invalid_config);
  CHECK(code_of([] { default_scene(9, 10); }) == Errc::invalid_config);
}

// ---- overlay --------------------------------------------------------------

TEST_CASE("palette colors are well separated") {
  const auto p = make_palette(8, 1);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(channel_distance(p[i], p[j]) >= 64);
  CHECK(make_palette(8, 1) == p);
  CHECK(make_palette(8, 2) != p);
}

TEST_CASE("overlay rendering") {
  const RgbImage frame(60, 40, Rgb{10, 20, 30});
  CHECK(render_overlay(frame, {}).data == frame.data);
  const Mask m = mask_from_box(BBox{5, 5, 20, 10}, 60, 40);
  const std::vector<OverlayItem> items{{"pig_01", BBox{5, 5, 20, 10}, m, 0.9}, {"pig_02", BBox{30, 20, 10, 10}, {}, {}}};
  const auto a = render_overlay(frame, items, 3), b = render_overlay(frame, items, 3);
  CHECK(a.data == b.data);
  CHECK(a.data != frame.data);
  const Rgb c = make_palette(2, 3)[0];
  const auto* px = a.px(15, 12);
  for (int k = 0; k < 3; ++k) CHECK(int(px[k]) == int(std::lround(0.6 * frame.px(15, 12)[k] + 0.4 * c[k])));
  CHECK(a.get(55, 35) == frame.get(55, 35));
}

// ---- report schemas -------------------------------------------------------

TEST_CASE("report JSON round trips") {
  const auto det = testing::detection_fixture();
  const auto det2 = detection_report_from(to_json(det));
  CHECK(to_json(det2) == to_json(det));
  for (const char* k : {"ap", "precision", "recall", "f1", "tpr", "fpr", "miss_rate", "mean_iou", "count_mae"})
    CHECK(to_json(det).contains(k));

  const auto mot = testing::mot_fixture();
  const auto j = to_json(mot);
  REQUIRE(j["sequences"].size() == 9);
  for (const char* k : {"idf1", "recall", "precision", "mostly_lost", "num_switches", "mota", "avg_tracklet_length",
                        "num_tracklets", "sequence"})
    CHECK(j["sequences"][0].contains(k));
  CHECK(to_json(mot_report_from(j["sequences"][3])) == to_json(mot[3].second));

  const auto cls = testing::classification_fixture(testing::mlp_rows(), testing::mlp_average());
  const auto cj = to_json(cls);
  CHECK(to_json(classification_report_from(cj)) == cj);
  for (const char* k : {"behavior", "precision", "recall", "f1_score", "support"}) CHECK(cj["classes"][0].contains(k));
}

TEST_CASE("rendered tables match the fixture cell layouts") {
  const auto det = render_detection_table(testing::detection_fixture());
  CHECK(testing::table_cells(det) == testing::detection_table_cells());
  CHECK(testing::columns_aligned(det));

  const auto mot = render_mot_table(testing::mot_fixture());
  CHECK(testing::table_cells(mot) == testing::mot_table_cells());
  CHECK(testing::columns_aligned(mot));

  for (const auto& [rows, avg] : {std::make_pair(testing::mlp_rows(), testing::mlp_average()),
                                  std::make_pair(testing::lstm_rows(), testing::lstm_average())}) {
    const auto t = render_classification_table(testing::classification_fixture(rows, avg));
    CHECK(testing::table_cells(t) == testing::classification_table_cells(rows, avg));
    CHECK(testing::columns_aligned(t));
  }
}

// ---- pipeline runs --------------------------------------------------------

TEST_CASE("full pipeline on a small synthetic scene") {
  testing::TempDir tmp;
  auto cfg = load_config(testing::write_scene(tmp.path(), 3, 90, 30));
  const auto first = run_pipeline(cfg);
  const auto st = statuses(first);
  for (const auto& s : stage_order()) CHECK(st.at(s) == "ok");
  const auto reports = cfg.reports_dir();
  for (const char* f : {"detection.json", "detection.txt", "mot.json", "mot.txt", "classification.json",
                        "classification.txt", "train_history.jsonl"})
    CHECK(fs::exists(reports / f));
  const auto mot = io::json::parse(io::read_text(reports / "mot.json"));
  CHECK(mot["sequences"][0]["idf1"] == 1.0);
  const auto det = io::json::parse(io::read_text(reports / "detection.json"));
  CHECK(det["ap"] == 1.0);
  CHECK(det["count_mae"] == 0.0);
  const auto cls = io::json::parse(io::read_text(reports / "classification.json"));
  CHECK(cls["classes"].size() == 3);

  SECTION("a rerun skips every stage") {
    for (const auto& [stage, status] : statuses(run_pipeline(cfg))) CHECK(status == "skipped");
  }
  SECTION("a stage subset runs alone") {
    const auto recs = run_pipeline(cfg, RunOptions{{"eval-mot"}, true});
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].status == "ok");
  }
  SECTION("a changed setting reruns its stage") {
    cfg.detect.threshold = 0.6;
    const auto st2 = statuses(run_pipeline(cfg, RunOptions{{"detect", "track"}, false}));
    CHECK(st2.at("detect") == "ok");
    CHECK(st2.at("track") == "ok");
  }
  SECTION("edited outputs are regenerated") {
    io::write_text(LayoutPaths{cfg.paths.root}.tracks(), "");
    CHECK(statuses(run_pipeline(cfg, RunOptions{{"track"}, false})).at("track") == "ok");
  }
  SECTION("a second run elsewhere is byte-identical") {
    testing::TempDir other;
    const auto cfg2 = load_config(testing::write_scene(other.path(), 3, 90, 30));
    run_pipeline(cfg2);
    const LayoutPaths a{cfg.paths.root}, b{cfg2.paths.root};
    CHECK(io::read_bytes(a.tracks()) == io::read_bytes(b.tracks()));
    CHECK(io::read_bytes(a.model()) == io::read_bytes(b.model()));
    CHECK(io::read_text(reports / "classification.json") == io::read_text(cfg2.reports_dir() / "classification.json"));
  }
}

TEST_CASE("missing inputs are dependency errors") {
  testing::TempDir tmp;
  auto cfg = parse_config(io::json::object());
  cfg.paths.root = tmp / "layout";
  CHECK(code_of([&] { run_pipeline(cfg, RunOptions{{"track"}, false}); }) == Errc::dependency);
  CHECK(code_of([&] { run_pipeline(cfg, RunOptions{{"ingest"}, false}); }) == Errc::dependency);
  CHECK(code_of([&] { run_pipeline(cfg, RunOptions{{"bogus"}, false}); }) == Errc::invalid_config);
  CHECK_FALSE(fs::exists(tmp / "layout" / ".herdpipe.lock"));
}

TEST_CASE("a failing stage is recorded in the ledger") {
  testing::TempDir tmp;
  auto cfg = load_config(testing::write_scene(tmp.path(), 2, 20, 10));
  cfg.track.kind = "external";
  cfg.track.cmd = std::string(HERDPIPE_STUB_DIR) + "/fake_tracker {chunk_dir} {seeds_file} {out_file} --fail";
  CHECK_THROWS_AS(run_pipeline(cfg), Error);
  const RunLedger ledger(LayoutPaths{cfg.paths.root}.ledger());
  REQUIRE_FALSE(ledger.records().empty());
  CHECK(ledger.records().back().stage == "track");
  CHECK(ledger.records().back().status == "failed");
  CHECK(ledger.records().back().error.find("fake tracker failure") != std::string::npos);
}

// ---- command line ---------------------------------------------------------

TEST_CASE("command line exit codes and outputs") {
  testing::TempDir tmp;
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  REQUIRE(testing::run_shell(cli() + " synth --out " + q(tmp / "scene") + " --objects 2 --frames 30 --segment 10 >/dev/null") == 0);
  CHECK(fs::exists(tmp / "scene" / "config.json"));
  CHECK(fs::exists(tmp / "scene" / "frames" / "frame_0000030.png"));

  io::write_text(tmp / "bad.json", R"({"paths": {"root": "x"}, "unknown": 1})");
  CHECK(testing::run_shell(cli() + " run --config " + q(tmp / "bad.json") + " 2>/dev/null") == 2);
  CHECK(testing::run_shell(cli() + " run --bogus-flag 2>/dev/null") == 2);
  CHECK(testing::run_shell(cli() + " track --config " + q(tmp / "scene" / "config.json") + " 2>/dev/null") == 3);

  const auto cfg = q(tmp / "scene" / "config.json");
  CHECK(testing::run_shell(cli() + " ingest --config " + cfg + " >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " detect-ingest --config " + cfg + " >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " detect-filter --config " + cfg + " >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " track --config " + cfg + " --tracker naive >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " crop --config " + cfg + " --size 32 --workers 2 >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " embed --config " + cfg + " --embedder toy >/dev/null") == 0);
  CHECK(testing::run_shell(cli() + " eval-mot --config " + cfg + " --report-dir-unused 2>/dev/null") == 2);
  CHECK(testing::run_shell(cli() + " eval-mot --config " + cfg + " --out " + q(tmp / "rep") + " >/dev/null") == 0);
  CHECK(fs::exists(tmp / "rep" / "mot.json"));
  CHECK(testing::run_shell(cli() + " eval-det --config " + cfg + " --report " + q(tmp / "rep") + " >/dev/null") == 0);
  CHECK(fs::exists(tmp / "rep" / "detection.txt"));
  CHECK(testing::run_shell(cli() + " tsne --config " + cfg + " --perplexity 5 --iterations 300 --out " +
                           q(tmp / "points.csv") + " >/dev/null") == 0);
  const auto csv = io::read_text(tmp / "points.csv");
  CHECK(csv.rfind("crop_filename,label,x,y\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 61);
  CHECK(testing::run_shell(cli() + " overlay --config " + cfg + " --frame 5 --tracks " +
                           q(tmp / "scene" / "layout" / "tracks.jsonl") + " --out " + q(tmp / "o.png") + " >/dev/null") == 0);
  CHECK(fs::exists(tmp / "o.png"));
}
