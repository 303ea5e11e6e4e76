#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/crop.hpp"
#include "herdpipe/embed/embedding_file.hpp"
#include "herdpipe/embed/toy_embedder.hpp"
#include "herdpipe/io/image_io.hpp"
#include "herdpipe/io/jsonl.hpp"
#include "herdpipe/io/process.hpp"

namespace herdpipe {

namespace fs = std::filesystem;

struct EmbeddingRecord {
  std::string crop_filename;
  std::vector<float> vector;

  std::size_t dim() const { return vector.size(); }
};

struct StoreRow {
  std::string crop_filename;
  std::string embedding_filename;
  std::size_t dim = 0;
  std::string label;  // empty when unlabeled
  FrameIndex frame_global_index = 0;
  std::string identity;
};

/// A directory of EMB1 files plus manifest.jsonl; one dimension per store.
struct EmbeddingStore {
  fs::path dir;
  std::size_t dim = 0;
  std::vector<StoreRow> rows;
  std::vector<std::vector<float>> vectors;  // parallel to rows
};

inline std::string embedding_filename_for(const std::string& crop_filename) {
  return fs::path(crop_filename).stem().string() + ".emb";
}

inline fs::path store_manifest_path(const fs::path& dir) { return dir / "manifest.jsonl"; }

inline void write_store_manifest(const fs::path& dir, const std::vector<StoreRow>& rows) {
  std::vector<io::json> out;
  for (const auto& r : rows)
    out.push_back(io::json{{"crop_filename", r.crop_filename},
                           {"embedding_filename", r.embedding_filename},
                           {"dim", r.dim},
                           {"label", r.label},
                           {"frame_global_index", r.frame_global_index},
                           {"identity", r.identity}});
  io::write_jsonl(store_manifest_path(dir), out);
}

/// Loads and validates a store: every row has a file, every file parses and
/// all dimensions agree.
inline EmbeddingStore load_store(const fs::path& dir) {
  if (!fs::exists(store_manifest_path(dir))) throw Error(Errc::dependency, "no embedding store at " + dir.string());
  EmbeddingStore store;
  store.dir = dir;
  std::vector<std::string> missing;
  for (const auto& r : io::read_jsonl(store_manifest_path(dir))) {
    StoreRow row;
    row.crop_filename = io::field<std::string>(r, "crop_filename");
    row.embedding_filename = io::field<std::string>(r, "embedding_filename");
    row.dim = io::field<std::size_t>(r, "dim");
    row.label = io::field_or<std::string>(r, "label", "");
    row.frame_global_index = io::field_or<FrameIndex>(r, "frame_global_index", 0);
    row.identity = io::field_or<std::string>(r, "identity", "");
    const auto path = dir / row.embedding_filename;
    if (!fs::exists(path)) {
      missing.push_back(row.crop_filename);
      continue;
    }
    auto v = read_embedding(path);
    if (v.size() != row.dim || (store.dim != 0 && v.size() != store.dim))
      throw Error(Errc::store_inconsistent, row.embedding_filename + " has dim " + std::to_string(v.size()) +
                                                ", store dim " + std::to_string(store.dim ? store.dim : row.dim));
    store.dim = v.size();
    store.rows.push_back(std::move(row));
    store.vectors.push_back(std::move(v));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::incomplete_store, "missing embeddings for: " + list);
  }
  return store;
}

inline StoreRow row_for(const CropRecord& rec, std::size_t dim) {
  return StoreRow{rec.filename, embedding_filename_for(rec.filename), dim, rec.behavior_label.value_or(""),
                  rec.frame_global_index, rec.identity};
}

/// Embeds every crop listed in the crop manifest with the toy embedder.
inline EmbeddingStore embed_crops_toy(const fs::path& crops_dir, const fs::path& out_dir) {
  const auto manifest = read_crop_manifest(crops_dir);
  fs::create_directories(out_dir);
  EmbeddingStore store;
  store.dir = out_dir;
  store.dim = kToyDim;
  for (const auto& rec : manifest.records) {
    auto v = toy_embed(io::read_image(crops_dir / rec.filename));
    auto row = row_for(rec, v.size());
    write_embedding(out_dir / row.embedding_filename, v);
    store.rows.push_back(std::move(row));
    store.vectors.push_back(std::move(v));
  }
  write_store_manifest(out_dir, store.rows);
  return store;
}

/// Runs an external embedder over the crop manifest. Placeholders:
/// {manifest}, {out_dir}, {dim}. The command must write one
/// "<crop stem>.emb" per manifest row into {out_dir}.
inline EmbeddingStore run_external_embedder(const std::string& cmd_template, const fs::path& crops_dir,
                                            const fs::path& out_dir, std::size_t dim) {
  if (cmd_template.empty()) throw Error(Errc::invalid_config, "external embedder command template is empty");
  const auto manifest = read_crop_manifest(crops_dir);
  fs::create_directories(out_dir);
  const auto cmd = io::fill_template(cmd_template, {{"manifest", crop_manifest_path(crops_dir).string()},
                                                    {"out_dir", out_dir.string()},
                                                    {"dim", std::to_string(dim)}});
  const auto result = io::run_command(cmd);
  if (result.exit_code != 0)
    throw Error(Errc::stage_failure, "embedder exited with " + std::to_string(result.exit_code) + ": " + result.output);
  std::vector<StoreRow> rows;
  for (const auto& rec : manifest.records) rows.push_back(row_for(rec, dim));
  write_store_manifest(out_dir, rows);
  try {
    return load_store(out_dir);
  } catch (const Error&) {
    fs::remove(store_manifest_path(out_dir));
    throw;
  }
}

}  // namespace herdpipe
