#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/params.hpp"

namespace herdpipe::learn {

struct MlpShape {
  int input_dim = 1024;
  int hidden1 = 512;
  int hidden2 = 256;
  int classes = 2;
  double dropout = 0.5;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// dense(hidden1)+ReLU+dropout -> dense(hidden2)+ReLU+dropout -> dense(classes)
struct MlpParams {
  MlpShape shape;
  Block w1, b1, w2, b2, w3, b3;
  VectorXd values;

  explicit MlpParams(const MlpShape& s = {}) : shape(s) {
    if (s.input_dim < 1 || s.hidden1 < 1 || s.hidden2 < 1 || s.classes < 1)
      throw Error(Errc::shape, "MLP dimensions must be positive");
    ParamLayout layout;
    w1 = layout.add(s.input_dim, s.hidden1);
    b1 = layout.add(s.hidden1, 1);
    w2 = layout.add(s.hidden1, s.hidden2);
    b2 = layout.add(s.hidden2, 1);
    w3 = layout.add(s.hidden2, s.classes);
    b3 = layout.add(s.classes, 1);
    values = VectorXd::Zero(layout.size());
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline MlpParams init_mlp(const MlpShape& shape, std::uint64_t seed) {
  MlpParams p(shape);
  std::mt19937_64 rng(seed);
  const auto fan = [](int n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  fill_uniform(p.values, p.w1, fan(shape.input_dim), rng);
  fill_uniform(p.values, p.b1, fan(shape.input_dim), rng);
  fill_uniform(p.values, p.w2, fan(shape.hidden1), rng);
  fill_uniform(p.values, p.b2, fan(shape.hidden1), rng);
  fill_uniform(p.values, p.w3, fan(shape.hidden2), rng);
  fill_uniform(p.values, p.b3, fan(shape.hidden2), rng);
  return p;
}

struct MlpCache {
  MatrixXd x, z1, m1, h1, z2, m2, h2, logits;  // h = relu(z) .* m
};

/// Batch rows are examples. In train mode dropout masks are drawn from
/// `dropout_seed`, so equal seeds reproduce equal masks.
inline MatrixXd mlp_forward(const MlpParams& p, const MatrixXd& x, Mode mode, std::uint64_t dropout_seed = 0,
                            MlpCache* cache = nullptr) {
  if (x.cols() != p.shape.input_dim)
    throw Error(Errc::shape, "MLP expects input dim " + std::to_string(p.shape.input_dim) + ", got " +
                                 std::to_string(x.cols()));
  const Index n = x.rows();
  std::mt19937_64 rng(dropout_seed);
  auto mask = [&](Index cols) {
    return mode == Mode::train ? dropout_mask(n, cols, p.shape.dropout, rng) : MatrixXd::Ones(n, cols);
  };
  MatrixXd z1 = (x * view(p.values, p.w1)).rowwise() + bias_row(p.values, p.b1);
  MatrixXd m1 = mask(p.shape.hidden1);
  MatrixXd h1 = z1.cwiseMax(0.0).cwiseProduct(m1);
  MatrixXd z2 = (h1 * view(p.values, p.w2)).rowwise() + bias_row(p.values, p.b2);
  MatrixXd m2 = mask(p.shape.hidden2);
  MatrixXd h2 = z2.cwiseMax(0.0).cwiseProduct(m2);
  MatrixXd logits = (h2 * view(p.values, p.w3)).rowwise() + bias_row(p.values, p.b3);
  if (cache) *cache = MlpCache{x, std::move(z1), std::move(m1), std::move(h1), std::move(z2), std::move(m2), std::move(h2), logits};
  return logits;
}

/// Exact parameter gradients for the masks recorded in `cache`.
inline VectorXd mlp_backward(const MlpParams& p, const MlpCache& c, const MatrixXd& dlogits) {
  VectorXd g = VectorXd::Zero(p.values.size());
  view(g, p.w3) = c.h2.transpose() * dlogits;
  view(g, p.b3) = dlogits.colwise().sum().transpose();
  MatrixXd dz2 = (dlogits * view(p.values, p.w3).transpose()).cwiseProduct(c.m2);
  dz2 = (c.z2.array() > 0.0).select(dz2, 0.0);
  view(g, p.w2) = c.h1.transpose() * dz2;
  view(g, p.b2) = dz2.colwise().sum().transpose();
  MatrixXd dz1 = (dz2 * view(p.values, p.w2).transpose()).cwiseProduct(c.m1);
  dz1 = (c.z1.array() > 0.0).select(dz1, 0.0);
  view(g, p.w1) = c.x.transpose() * dz1;
  view(g, p.b1) = dz1.colwise().sum().transpose();
  return g;
}

}  // namespace herdpipe::learn
