#include <catch_amalgamated.hpp>

#include <random>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/geometry.hpp"
#include "herdpipe/core/mask.hpp"
#include "herdpipe/io/formats.hpp"
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

BinaryGrid grid_from(int w, int h, std::initializer_list<std::pair<int, int>> on) {
  BinaryGrid g(w, h);
  for (auto [x, y] : on) g.at(x, y) = 1;
  return g;
}

}  // namespace

TEST_CASE("iou of identical, disjoint and half-shifted boxes") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
  CHECK_THAT(iou({0, 0, 2, 2}, {1, 0, 2, 2}), WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("iou of two degenerate boxes is zero") { CHECK(iou({1, 1, 0, 0}, {1, 1, 0, 0}) == 0.0); }

TEST_CASE("iou rejects non-finite coordinates") {
  CHECK(code_of([] { iou({std::nan(""), 0, 1, 1}, {0, 0, 1, 1}); }) == Errc::invalid_geometry);
  CHECK(code_of([] { iou({0, 0, 1, 1}, {0, INFINITY, 1, 1}); }) == Errc::invalid_geometry);
}

TEST_CASE("iou is symmetric, bounded and matches the reference on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 50);
  for (int i = 0; i < 2000; ++i) {
    const BBox a{u(rng), u(rng), u(rng) / 2, u(rng) / 2}, b{u(rng), u(rng), u(rng) / 2, u(rng) / 2};
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK_THAT(v, WithinAbs(testing::ref_iou(a, b), 1e-12));
    if (a.area() > 0) CHECK_THAT(iou(a, a), WithinAbs(1.0, 1e-15));
  }
}

TEST_CASE("mask encode examples") {
  CHECK(mask_encode(BinaryGrid(3, 3)).counts == std::vector<std::uint32_t>{9});
  CHECK(mask_encode(BinaryGrid(2, 2, 1)).counts == std::vector<std::uint32_t>{0, 4});
  // column-major (1,0,0,1): (0,0)=1, (0,1)=0, (1,0)=0, (1,1)=1
  CHECK(mask_encode(grid_from(2, 2, {{0, 0}, {1, 1}})).counts == std::vector<std::uint32_t>{0, 1, 2, 1});
}

TEST_CASE("mask decode rejects count sums that disagree with the size") {
  CHECK(code_of([] { mask_decode(Mask{2, 2, {1, 2}}); }) == Errc::corrupt_mask);
  CHECK(code_of([] { mask_decode(Mask{2, 2, {3, 2}}); }) == Errc::corrupt_mask);
}

TEST_CASE("mask encode rejects empty rasters") {
  CHECK(code_of([] { mask_encode(BinaryGrid(0, 3)); }) == Errc::invalid_input);
}

TEST_CASE("mask round trip on 1000 random rasters") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 12);
  std::bernoulli_distribution bit(0.4);
  for (int i = 0; i < 1000; ++i) {
    BinaryGrid g(dim(rng), dim(rng));
    for (auto& v : g.data) v = bit(rng);
    const Mask m = mask_encode(g);
    CHECK(mask_decode(m) == g);
    std::uint64_t sum = 0;
    for (auto c : m.counts) sum += c;
    CHECK(sum == m.pixel_count());
    CHECK(io::mask_from_json(io::mask_to_json(m)) == m);
  }
}

TEST_CASE("mask_to_bbox examples") {
  CHECK(mask_to_bbox(mask_encode(BinaryGrid(4, 4, 1))) == BBox{0, 0, 4, 4});
  CHECK(mask_to_bbox(mask_encode(grid_from(5, 5, {{2, 3}}))) == BBox{2, 3, 1, 1});
  CHECK(mask_to_bbox(mask_encode(grid_from(5, 5, {{0, 0}, {3, 1}}))) == BBox{0, 0, 4, 2});
  CHECK(code_of([] { mask_to_bbox(mask_encode(BinaryGrid(3, 3))); }) == Errc::empty_mask);
}

TEST_CASE("mask_to_bbox is the tightest cover on random masks") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> dim(1, 10);
  std::bernoulli_distribution bit(0.15);
  for (int i = 0; i < 500; ++i) {
    BinaryGrid g(dim(rng), dim(rng));
    for (auto& v : g.data) v = bit(rng);
    if (std::count(g.data.begin(), g.data.end(), 1) == 0) g.at(0, 0) = 1;
    const BBox b = mask_to_bbox(mask_encode(g));
    auto inside = [](const BBox& box, int x, int y) {
      return x >= box.x && x < box.x + box.w && y >= box.y && y < box.y + box.h;
    };
    bool touches_l = false, touches_r = false, touches_t = false, touches_b = false;
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        if (!g.at(x, y)) continue;
        CHECK(inside(b, x, y));
        touches_l |= x == b.x;
        touches_r |= x == b.x + b.w - 1;
        touches_t |= y == b.y;
        touches_b |= y == b.y + b.h - 1;
      }
    CHECK((touches_l && touches_r && touches_t && touches_b));
  }
}

TEST_CASE("error codes map to process exit codes") {
  CHECK(exit_code_for(Errc::invalid_config) == 2);
  CHECK(exit_code_for(Errc::dependency) == 3);
  CHECK(exit_code_for(Errc::stage_failure) == 4);
  CHECK(exit_code_for(Errc::corrupt_mask) == 4);
}

TEST_CASE("seeds file round trip") {
  testing::TempDir dir;
  SeedSet s;
  s.frame = 3;
  s.provenance = Provenance::human_reviewed;
  s.seeds = {{"pig_01", {1.5, 2.25, 30, 40.125}}, {"pig_02", {100, 50, 0.1, 12}}};
  io::write_seeds(dir / "seeds.jsonl", s);
  CHECK(io::read_seeds(dir / "seeds.jsonl") == s);
}

TEST_CASE("track file round trip keeps masks and tracker id") {
  testing::TempDir dir;
  TrackRun run;
  run.tracker_id = "naive";
  auto& t = run.get_or_add("pig_01");
  t.entries[1] = {BBox{0, 0, 2, 2}, mask_encode(grid_from(4, 4, {{0, 0}, {1, 1}}))};
  t.entries[2] = {BBox{1, 1, 2, 2}, std::nullopt};
  io::write_track_run(dir / "t.jsonl", run);
  const auto back = io::read_track_run(dir / "t.jsonl");
  CHECK(back.tracker_id == "naive");
  REQUIRE(back.trajectories.size() == 1);
  CHECK(back.trajectories[0] == run.trajectories[0]);
}
