#include <catch_amalgamated.hpp>

#include "herdpipe/ingest.hpp"
#include "herdpipe/io/image_io.hpp"
#include "test_support.hpp"

using namespace herdpipe;

namespace {

void write_frames(const fs::path& dir, int n, int w = 16, int h = 12) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "src_%03d.png", i);
    const auto v = static_cast<std::uint8_t>(10 * i);
    io::write_image(dir / name, RgbImage(w, h, Rgb{v, v, v}), io::ImageFormat::png);
  }
}

std::string stub(const std::string& name) { return std::string(HERDPIPE_STUB_DIR) + "/" + name; }

}  // namespace

TEST_CASE("plan_frames samples every stride-th source frame") {
  CHECK(plan_frames(10, 1) == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(plan_frames(10, 2) == std::vector<std::int64_t>{0, 2, 4, 6, 8});
  CHECK(plan_frames(600, 1).size() == 600);
  CHECK(plan_frames(0, 3).empty());
  CHECK_THROWS_AS(plan_frames(10, 0), Error);
  for (std::int64_t total = 0; total < 40; ++total)
    for (std::int64_t stride = 1; stride < 7; ++stride)
      CHECK(static_cast<std::int64_t>(plan_frames(total, stride).size()) == (total + stride - 1) / stride);
}

TEST_CASE("chunk_frames fills greedily") {
  CHECK(chunk_frames(7000, 3000) == std::vector<std::int64_t>{3000, 3000, 1000});
  CHECK(chunk_frames(3000, 3000) == std::vector<std::int64_t>{3000});
  CHECK(chunk_frames(0).empty());
  CHECK(chunk_frames(7200) == std::vector<std::int64_t>{3000, 3000, 1200});
  CHECK_THROWS_AS(chunk_frames(5, 0), Error);
}

TEST_CASE("frame_name pads to seven digits") {
  CHECK(frame_name(1) == "0000001.jpg");
  CHECK(frame_name(23) == "0000023.jpg");
  CHECK(frame_name(9'999'999) == "9999999.jpg");
  try {
    frame_name(10'000'000);
    FAIL("expected naming overflow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::naming_overflow);
  }
  CHECK_THROWS_AS(frame_name(0), Error);
}

TEST_CASE("ingest of ten images at stride 2 and max chunk 3") {
  testing::TempDir tmp;
  write_frames(tmp / "src", 10);
  const auto layout = ingest(tmp / "src", IngestOptions{2, 3, "", {}}, tmp / "out");
  REQUIRE(layout.frames.size() == 5);
  const auto spans = layout.chunks();
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].count == 3);
  CHECK(spans[1].count == 2);
  std::vector<std::int64_t> sources;
  for (std::size_t i = 0; i < layout.frames.size(); ++i) {
    const auto& e = layout.frames[i];
    CHECK(e.frame.global_index == static_cast<FrameIndex>(i + 1));
    CHECK(e.frame.filename == frame_name(e.frame.global_index));
    CHECK(fs::exists(layout.frame_path(e.frame)));
    sources.push_back(e.source_index);
  }
  CHECK(sources == plan_frames(10, 2));
  CHECK(fs::exists(tmp / "out" / "chunk_000" / "0000003.jpg"));
  CHECK(fs::exists(tmp / "out" / "chunk_001" / "0000004.jpg"));
  const auto back = read_layout(tmp / "out");
  CHECK(back.frames == layout.frames);
}

TEST_CASE("ingest of an empty directory gives an empty layout") {
  testing::TempDir tmp;
  fs::create_directories(tmp / "src");
  const auto layout = ingest(tmp / "src", IngestOptions{}, tmp / "out");
  CHECK(layout.frames.empty());
  CHECK(layout.chunks().empty());
  CHECK(fs::exists(manifest_path(tmp / "out")));
}

TEST_CASE("ingest is byte-identical on rerun") {
  testing::TempDir tmp;
  write_frames(tmp / "src", 7);
  ingest(tmp / "src", IngestOptions{1, 4, "", {}}, tmp / "a");
  ingest(tmp / "src", IngestOptions{1, 4, "", {}}, tmp / "b");
  const auto la = read_layout(tmp / "a");
  for (const auto& e : la.frames) {
    const auto rel = fs::relative(la.frame_path(e.frame), tmp / "a");
    CHECK(io::read_bytes(tmp / "a" / rel) == io::read_bytes(tmp / "b" / rel));
  }
  CHECK(io::read_text(manifest_path(tmp / "a")) == io::read_text(manifest_path(tmp / "b")));
}

TEST_CASE("unreadable images are recorded and skipped") {
  testing::TempDir tmp;
  write_frames(tmp / "src", 4);
  io::write_text(tmp / "src" / "src_001.png", "not an image");
  const auto layout = ingest(tmp / "src", IngestOptions{}, tmp / "out");
  CHECK(layout.frames.size() == 3);
  REQUIRE(layout.failures.size() == 1);
  CHECK(layout.failures[0].source_index == 1);
  CHECK(layout.frames[1].frame.global_index == 2);
  CHECK(layout.frames[1].source_index == 2);
  CHECK(read_layout(tmp / "out").failures.size() == 1);
}

TEST_CASE("video ingest goes through the decoder command") {
  testing::TempDir tmp;
  io::write_text(tmp / "clip.vid", "9 20 10\n");
  SECTION("decoder samples itself when the template names the stride") {
    const auto layout = ingest(tmp / "clip.vid",
                               IngestOptions{2, 3, stub("fake_decoder") + " {input} {output_pattern} {stride}", {}},
                               tmp / "out");
    CHECK(layout.frames.size() == 5);
    CHECK(layout.chunks().size() == 2);
    const auto img = io::read_image(layout.frame_path(layout.frames[1].frame));
    CHECK(img.width == 20);
    CHECK(std::abs(int(img.get(0, 0)[0]) - 3) <= 2);  // source frame 3, JPEG tolerance
  }
  SECTION("otherwise the directory pass applies the stride") {
    const auto layout =
        ingest(tmp / "clip.vid", IngestOptions{3, 3000, stub("fake_decoder") + " {input} {output_pattern}", {}},
               tmp / "out");
    CHECK(layout.frames.size() == 3);
  }
  SECTION("a failing decoder surfaces its diagnostics") {
    try {
      ingest(tmp / "clip.vid", IngestOptions{1, 3000, stub("fake_decoder") + " {input} {output_pattern} --fail", {}},
             tmp / "out");
      FAIL("expected decode error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::decode);
      CHECK(std::string(e.what()).find("cannot decode") != std::string::npos);
    }
  }
  SECTION("a video without a decoder template is a config error") {
    try {
      ingest(tmp / "clip.vid", IngestOptions{}, tmp / "out");
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::invalid_config);
    }
  }
}
