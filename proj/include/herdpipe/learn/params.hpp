#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace herdpipe::learn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatMap = Eigen::Map<MatrixXd>;
using ConstMatMap = Eigen::Map<const MatrixXd>;

/// A named-by-position slice of a flat parameter vector, viewed as a
/// column-major rows x cols matrix.
struct Block {
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

class ParamLayout {
 public:
  Block add(Index rows, Index cols) {
    Block b{size_, rows, cols};
    size_ += rows * cols;
    return b;
  }
  Index size() const { return size_; }

 private:
  Index size_ = 0;
};

inline MatMap view(VectorXd& v, const Block& b) { return MatMap(v.data() + b.offset, b.rows, b.cols); }
inline ConstMatMap view(const VectorXd& v, const Block& b) { return ConstMatMap(v.data() + b.offset, b.rows, b.cols); }

/// Row vector view of a bias block, ready for broadcasting over a batch.
inline auto bias_row(const VectorXd& v, const Block& b) { return view(v, b).col(0).transpose(); }

/// 53-bit uniform in [0,1) from a 64-bit engine; identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void fill_uniform(VectorXd& v, const Block& b, double bound, std::mt19937_64& rng) {
  for (Index i = 0; i < b.size(); ++i) v[b.offset + i] = (2.0 * uniform01(rng) - 1.0) * bound;
}

/// Inverted dropout mask: kept entries carry 1/(1-p), dropped entries 0.
inline MatrixXd dropout_mask(Index rows, Index cols, double p, std::mt19937_64& rng) {
  MatrixXd m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = uniform01(rng) < p ? 0.0 : keep_scale;
  return m;
}

/// splitmix64 finalizer, used to derive independent per-(epoch, batch) seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class Mode { train, eval };

}  // namespace herdpipe::learn
