#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "herdpipe/core/error.hpp"

namespace herdpipe {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  int checkpoint_every = 50;
  std::uint64_t seed = 7;
};

struct TsneResult {
  Eigen::MatrixXd points;  // n x 2
  double kl_initial = 0.0;
  double kl_final = 0.0;
  std::vector<std::pair<int, double>> kl_checkpoints;  // (iteration, KL)
};

namespace detail {

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

/// Row-conditional affinities with each bandwidth bisected so the row's
/// entropy equals log(perplexity).
inline Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    Eigen::VectorXd row(n);
    for (int iter = 0; iter < 200; ++iter) {
      double min_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) min_d = std::min(min_d, d2(i, j));
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - min_d));
        sum += row(j);
      }
      double h = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) /= sum;
        if (row(j) > 1e-300) h -= row(j) * std::log(row(j));
      }
      const double diff = h - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {  // too flat: sharpen
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

inline double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (i != j && p(i, j) > 0) kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
  return kl;
}

/// Student-t joint affinities in the embedding; also returns the unnormalized
/// kernel (1 + |yi - yj|^2)^-1.
inline Eigen::MatrixXd low_dim_affinities(const Eigen::MatrixXd& y, Eigen::MatrixXd& kernel) {
  kernel = (1.0 + squared_distances(y).array()).inverse().matrix();
  kernel.diagonal().setZero();
  const double sum = kernel.sum();
  return (kernel / sum).cwiseMax(1e-12);
}

}  // namespace detail

/// Exact t-SNE to two dimensions. Exact duplicate rows get a seeded jitter of
/// 1e-6 per coordinate before affinities are computed.
inline TsneResult tsne(const Eigen::MatrixXd& input, const TsneConfig& cfg = {}) {
  const Eigen::Index n = input.rows();
  if (n < 3) throw Error(Errc::invalid_input, "t-SNE needs at least 3 points");
  if (!(cfg.perplexity > 0.0) || cfg.perplexity >= static_cast<double>(n))
    throw Error(Errc::invalid_config, "perplexity must be in (0, n)");
  if (!input.allFinite()) throw Error(Errc::invalid_input, "t-SNE input must be finite");

  std::mt19937_64 rng(cfg.seed);
  Eigen::MatrixXd x = input;
  {
    std::normal_distribution<double> jitter(0.0, 1e-6);
    for (Eigen::Index i = 1; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j)
        if (x.row(i) == x.row(j)) {
          for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) += jitter(rng);
          break;
        }
  }

  Eigen::MatrixXd p = detail::conditional_affinities(detail::squared_distances(x), cfg.perplexity);
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  std::normal_distribution<double> init(0.0, 1e-4);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) y(i, 0) = init(rng), y(i, 1) = init(rng);

  TsneResult result;
  Eigen::MatrixXd kernel;
  result.kl_initial = detail::kl_divergence(p, detail::low_dim_affinities(y, kernel));
  result.kl_checkpoints.emplace_back(0, result.kl_initial);

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  for (int it = 0; it < cfg.iterations; ++it) {
    const double exaggeration = it < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
    const Eigen::MatrixXd q = detail::low_dim_affinities(y, kernel);
    const Eigen::MatrixXd w = ((exaggeration * p - q).array() * kernel.array()).matrix();
    // grad_i = 4 * sum_j w_ij (y_i - y_j)
    Eigen::MatrixXd grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0) == (velocity(i, c) > 0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
      }
    velocity = momentum * velocity - cfg.learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)
      result.kl_checkpoints.emplace_back(it + 1, detail::kl_divergence(p, detail::low_dim_affinities(y, kernel)));
  }
  result.kl_final = detail::kl_divergence(p, detail::low_dim_affinities(y, kernel));
  if (result.kl_checkpoints.back().first != cfg.iterations)
    result.kl_checkpoints.emplace_back(cfg.iterations, result.kl_final);
  result.points = y;
  return result;
}

}  // namespace herdpipe
