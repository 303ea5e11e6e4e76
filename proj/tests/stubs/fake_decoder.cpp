// Stand-in for a video decoder.
// usage: fake_decoder INPUT OUTPUT_PATTERN [STRIDE] [--fail]
// INPUT is a text file "N [W H]"; writes frames 1..N (every STRIDE-th when
// given) as PNGs whose gray level encodes the source frame number.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "herdpipe/io/image_io.hpp"

using namespace herdpipe;

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: fake_decoder INPUT OUTPUT_PATTERN [STRIDE] [--fail]\n");
    return 64;
  }
  int stride = 1;
  for (int i = 3; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--fail") {
      std::fprintf(stderr, "cannot decode %s\n", argv[1]);
      return 1;
    }
    stride = std::max(1, std::atoi(argv[i]));
  }
  std::ifstream in(argv[1]);
  int n = 0, w = 32, h = 24;
  if (!(in >> n)) {
    std::fprintf(stderr, "not a video: %s\n", argv[1]);
    return 1;
  }
  in >> w >> h;
  int out_index = 1;
  for (int f = 1; f <= n; f += stride) {
    const auto v = static_cast<std::uint8_t>(f % 256);
    RgbImage img(w, h, Rgb{v, v, v});
    char name[4096];
    std::snprintf(name, sizeof name, argv[2], out_index++);
    io::write_image(name, img, io::ImageFormat::png);
  }
  return 0;
}
