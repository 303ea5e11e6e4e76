// Stand-in for an external embedding network.
// usage: fake_embedder MANIFEST OUT_DIR DIM [--omit-one] [--fail]
// Writes a deterministic DIM-float vector per crop, seeded by its filename.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "herdpipe/crop.hpp"
#include "herdpipe/embed/embedding_file.hpp"

namespace fs = std::filesystem;
using namespace herdpipe;

int main(int argc, char** argv) {
  if (argc < 4) {
    std::fprintf(stderr, "usage: fake_embedder MANIFEST OUT_DIR DIM [options]\n");
    return 64;
  }
  const fs::path manifest = argv[1], out_dir = argv[2];
  const std::size_t dim = std::strtoul(argv[3], nullptr, 10);
  bool omit_one = false, fail = false;
  for (int i = 4; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--omit-one") omit_one = true;
    else if (a == "--fail") fail = true;
  }
  if (fail) return 5;
  try {
    const auto m = read_crop_manifest(manifest.parent_path());
    fs::create_directories(out_dir);
    bool skipped = false;
    for (const auto& rec : m.records) {
      if (omit_one && !skipped) {
        skipped = true;
        continue;
      }
      std::mt19937_64 rng(std::hash<std::string>{}(rec.filename));
      std::normal_distribution<float> n(0.0f, 1.0f);
      std::vector<float> v(dim);
      for (auto& x : v) x = n(rng);
      write_embedding(out_dir / (fs::path(rec.filename).stem().string() + ".emb"), v);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 0;
}
