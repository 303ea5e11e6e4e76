#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/params.hpp"

namespace herdpipe::learn {

/// Inverse-frequency weights normalized to sum to one:
/// w_c = (1/f_c) / sum_k (1/f_k), f_c = count_c / total.
inline VectorXd class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw Error(Errc::invalid_class, "no classes");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  VectorXd w(static_cast<Index>(counts.size()));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error(Errc::invalid_class, "class " + std::to_string(c) + " has no examples");
    w[static_cast<Index>(c)] = total / static_cast<double>(counts[c]);
  }
  return w / w.sum();
}

inline std::vector<std::size_t> count_labels(std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(Errc::invalid_class, "label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

struct LossGrad {
  double loss = 0.0;
  MatrixXd grad;  // d loss / d logits, same shape as the logits
};

/// Row-wise softmax with max subtraction.
inline MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// Mean over the batch of -w[y] * log softmax(z)[y]; gradient
/// w[y] * (softmax - onehot) / N per row.
inline LossGrad weighted_cross_entropy(const MatrixXd& logits, std::span<const int> targets, const VectorXd& weights) {
  const Index n = logits.rows();
  if (static_cast<std::size_t>(n) != targets.size()) throw Error(Errc::shape, "logits/targets batch mismatch");
  if (logits.cols() != weights.size()) throw Error(Errc::shape, "logits/weights class mismatch");
  LossGrad out;
  out.grad = MatrixXd::Zero(n, logits.cols());
  if (n == 0) return out;
  for (Index i = 0; i < n; ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw Error(Errc::invalid_class, "target out of range");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    const double w = weights[y];
    out.loss += -w * (logits(i, y) - lse);
    out.grad.row(i) = w * (logits.row(i).array() - lse).exp().matrix();
    out.grad(i, y) -= w;
  }
  out.loss /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

}  // namespace herdpipe::learn
