#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/types.hpp"
#include "herdpipe/io/image_io.hpp"
#include "herdpipe/io/jsonl.hpp"
#include "herdpipe/io/process.hpp"

namespace herdpipe {

namespace fs = std::filesystem;

inline constexpr int kDefaultMaxChunk = 3000;
inline constexpr FrameIndex kMaxGlobalIndex = 9'999'999;

/// Source indices kept by stride sampling: 0, stride, 2*stride, ... < total.
inline std::vector<std::int64_t> plan_frames(std::int64_t total, std::int64_t stride) {
  if (stride < 1) throw Error(Errc::invalid_config, "stride must be >= 1, got " + std::to_string(stride));
  if (total < 0) throw Error(Errc::invalid_config, "frame total must be >= 0");
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>((total + stride - 1) / stride));
  for (std::int64_t i = 0; i < total; i += stride) out.push_back(i);
  return out;
}

/// Greedy fill: every chunk holds max_chunk frames except possibly the last.
inline std::vector<std::int64_t> chunk_frames(std::int64_t n_selected, std::int64_t max_chunk = kDefaultMaxChunk) {
  if (max_chunk < 1) throw Error(Errc::invalid_config, "max_chunk must be >= 1");
  if (n_selected < 0) throw Error(Errc::invalid_config, "frame count must be >= 0");
  std::vector<std::int64_t> sizes;
  for (std::int64_t left = n_selected; left > 0; left -= max_chunk) sizes.push_back(std::min(left, max_chunk));
  return sizes;
}

inline std::string frame_name(FrameIndex global_index) {
  if (global_index < 1 || global_index > kMaxGlobalIndex)
    throw Error(Errc::naming_overflow, "global index " + std::to_string(global_index) + " outside 1..9999999");
  char buf[16];
  std::snprintf(buf, sizeof buf, "%07lld", static_cast<long long>(global_index));
  return std::string(buf) + ".jpg";
}

inline std::string chunk_dir_name(int chunk_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chunk_%03d", chunk_id);
  return buf;
}

struct ChunkSpan {
  int chunk_id = 0;
  FrameIndex first_global_index = 1;
  std::int64_t count = 0;

  FrameIndex last_global_index() const { return first_global_index + count - 1; }
  friend bool operator==(const ChunkSpan&, const ChunkSpan&) = default;
};

struct IngestPlan {
  std::int64_t total_source_frames = 0;
  std::int64_t stride = 1;
  std::vector<std::int64_t> selected;
  std::vector<ChunkSpan> chunks;
};

inline std::vector<ChunkSpan> chunk_spans(std::int64_t n_selected, std::int64_t max_chunk) {
  std::vector<ChunkSpan> spans;
  FrameIndex next = 1;
  int id = 0;
  for (auto size : chunk_frames(n_selected, max_chunk)) {
    spans.push_back({id++, next, size});
    next += size;
  }
  return spans;
}

inline IngestPlan make_plan(std::int64_t total, std::int64_t stride, std::int64_t max_chunk = kDefaultMaxChunk) {
  IngestPlan plan;
  plan.total_source_frames = total;
  plan.stride = stride;
  plan.selected = plan_frames(total, stride);
  plan.chunks = chunk_spans(static_cast<std::int64_t>(plan.selected.size()), max_chunk);
  return plan;
}

struct ManifestEntry {
  FrameRef frame;
  std::int64_t source_index = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct IngestFailure {
  std::int64_t source_index = 0;
  std::string source;
  std::string error;
};

/// On-disk sequence: chunk_000/, chunk_001/, ... plus manifest.jsonl.
struct SequenceLayout {
  fs::path root;
  std::vector<ManifestEntry> frames;
  std::vector<IngestFailure> failures;

  std::vector<ChunkSpan> chunks() const {
    std::vector<ChunkSpan> spans;
    for (const auto& e : frames) {
      if (spans.empty() || spans.back().chunk_id != e.frame.chunk_id)
        spans.push_back({e.frame.chunk_id, e.frame.global_index, 0});
      ++spans.back().count;
    }
    return spans;
  }

  fs::path frame_path(const FrameRef& f) const { return root / chunk_dir_name(f.chunk_id) / f.filename; }
  fs::path chunk_path(int chunk_id) const { return root / chunk_dir_name(chunk_id); }

  std::optional<FrameRef> find(FrameIndex global_index) const {
    if (global_index >= 1 && global_index <= static_cast<FrameIndex>(frames.size()) &&
        frames[global_index - 1].frame.global_index == global_index)
      return frames[global_index - 1].frame;
    for (const auto& e : frames)
      if (e.frame.global_index == global_index) return e.frame;
    return std::nullopt;
  }
};

inline fs::path manifest_path(const fs::path& root) { return root / "manifest.jsonl"; }

inline void write_manifest(const SequenceLayout& layout) {
  std::vector<io::json> rows;
  for (const auto& e : layout.frames)
    rows.push_back(io::json{{"global_index", e.frame.global_index},
                            {"chunk_id", e.frame.chunk_id},
                            {"filename", e.frame.filename},
                            {"source_index", e.source_index}});
  for (const auto& f : layout.failures)
    rows.push_back(io::json{{"source_index", f.source_index}, {"source", f.source}, {"error", f.error}});
  io::write_jsonl(manifest_path(layout.root), rows);
}

inline SequenceLayout read_layout(const fs::path& root) {
  SequenceLayout layout;
  layout.root = root;
  if (!fs::exists(manifest_path(root)))
    throw Error(Errc::dependency, "no manifest at " + manifest_path(root).string());
  for (const auto& r : io::read_jsonl(manifest_path(root))) {
    if (r.contains("error")) {
      layout.failures.push_back({io::field<std::int64_t>(r, "source_index"), io::field_or<std::string>(r, "source", ""),
                                 io::field<std::string>(r, "error")});
      continue;
    }
    ManifestEntry e;
    e.frame.global_index = io::field<FrameIndex>(r, "global_index");
    e.frame.chunk_id = io::field<int>(r, "chunk_id");
    e.frame.filename = io::field<std::string>(r, "filename");
    e.source_index = io::field<std::int64_t>(r, "source_index");
    if (!layout.frames.empty() && e.frame.global_index != layout.frames.back().frame.global_index + 1)
      throw Error(Errc::format, "manifest global indices are not continuous at " + e.frame.filename);
    layout.frames.push_back(std::move(e));
  }
  return layout;
}

struct IngestOptions {
  std::int64_t stride = 1;
  std::int64_t max_chunk = kDefaultMaxChunk;
  /// Shell template for video sources; placeholders {input}, {stride},
  /// {output_pattern}. When {stride} appears the decoder samples itself and
  /// the directory pass runs at stride 1.
  std::string decoder_cmd;
  /// Scratch space for decoded video frames (defaults to <out_root>/.decode).
  fs::path work_dir;
};

namespace detail {

inline bool is_jpeg_name(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".jpg" || ext == ".jpeg";
}

inline void clear_previous_layout(const fs::path& root) {
  if (!fs::exists(root)) return;
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (e.is_directory() && name.rfind("chunk_", 0) == 0) fs::remove_all(e.path());
  }
  fs::remove(manifest_path(root));
}

}  // namespace detail

/// Materializes the chunked layout from a directory of raster images, taken
/// in lexicographic filename order. Unreadable files are recorded in the
/// manifest and skipped without consuming a global index.
inline SequenceLayout ingest_directory(const fs::path& source_dir, const IngestOptions& opt, const fs::path& out_root) {
  if (!fs::is_directory(source_dir)) throw Error(Errc::dependency, "source directory missing: " + source_dir.string());
  if (opt.max_chunk < 1) throw Error(Errc::invalid_config, "max_chunk must be >= 1");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(source_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  const auto selected = plan_frames(static_cast<std::int64_t>(files.size()), opt.stride);

  fs::create_directories(out_root);
  detail::clear_previous_layout(out_root);

  SequenceLayout layout;
  layout.root = out_root;
  FrameIndex next = 1;
  for (auto src_idx : selected) {
    const auto& src = files[static_cast<std::size_t>(src_idx)];
    std::vector<std::uint8_t> bytes;
    std::vector<std::uint8_t> out_bytes;
    try {
      bytes = io::read_bytes(src);
      const RgbImage img = io::decode_image(bytes, src.string());
      out_bytes = detail::is_jpeg_name(src) ? std::move(bytes) : io::encode_image(img, io::ImageFormat::jpeg);
    } catch (const Error& e) {
      layout.failures.push_back({src_idx, src.filename().string(), e.what()});
      continue;
    }
    const int chunk_id = static_cast<int>((next - 1) / opt.max_chunk);
    FrameRef ref{next, chunk_id, frame_name(next)};
    io::write_bytes(layout.frame_path(ref), out_bytes);
    layout.frames.push_back({ref, src_idx});
    ++next;
  }
  write_manifest(layout);
  return layout;
}

/// Decodes a video through the configured external command, then ingests the
/// decoded frames.
inline SequenceLayout ingest_video(const fs::path& video, const IngestOptions& opt, const fs::path& out_root) {
  if (opt.decoder_cmd.empty())
    throw Error(Errc::invalid_config, "video source requires a decoder command template");
  if (!fs::exists(video)) throw Error(Errc::dependency, "video missing: " + video.string());
  const fs::path work = opt.work_dir.empty() ? out_root / ".decode" : opt.work_dir;
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string cmd = io::fill_template(
      opt.decoder_cmd,
      {{"input", video.string()}, {"stride", std::to_string(opt.stride)}, {"output_pattern", (work / "%07d.png").string()}});
  const auto result = io::run_command(cmd);
  if (result.exit_code != 0) {
    throw Error(Errc::decode, "decoder exited with " + std::to_string(result.exit_code) + ": " + result.output);
  }
  IngestOptions dir_opt = opt;
  if (opt.decoder_cmd.find("{stride}") != std::string::npos) dir_opt.stride = 1;
  auto layout = ingest_directory(work, dir_opt, out_root);
  fs::remove_all(work);
  return layout;
}

inline SequenceLayout ingest(const fs::path& source, const IngestOptions& opt, const fs::path& out_root) {
  if (fs::is_directory(source)) return ingest_directory(source, opt, out_root);
  return ingest_video(source, opt, out_root);
}

}  // namespace herdpipe
