#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/adam.hpp"
#include "herdpipe/learn/bilstm.hpp"
#include "herdpipe/learn/loss.hpp"
#include "herdpipe/learn/mlp.hpp"
#include "herdpipe/learn/split.hpp"
#include "herdpipe/learn/windows.hpp"

namespace herdpipe::learn {

struct TrainConfig {
  AdamConfig adam;
  int max_epochs = 50;
  int patience = 10;
  int batch_size = 64;
  SplitRatios split = kDefaultSplit;
  std::uint64_t seed = 0;
};

/// What the trainer needs from a model: a training-mode loss with gradient
/// for a batch of example indices, and eval-mode logits.
struct Problem {
  std::vector<int> labels;
  VectorXd class_weights;
  std::function<LossGrad(const VectorXd& params, std::span<const std::size_t> batch, std::uint64_t dropout_seed,
                         VectorXd& grad)>
      train_step;
  std::function<MatrixXd(const VectorXd& params, std::span<const std::size_t> batch)> eval_logits;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  VectorXd best_params;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochRecord> history;
  std::optional<std::string> divergence;
};

inline std::vector<int> argmax_rows(const MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index k = 0;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

inline std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

/// Eval-mode weighted loss and accuracy over `idx`, in batches.
inline std::pair<double, double> evaluate_loss(const Problem& prob, const VectorXd& params,
                                               std::span<const std::size_t> idx, int batch_size) {
  if (idx.empty()) return {0.0, 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(batch_size)) {
    const auto batch = idx.subspan(at, std::min<std::size_t>(static_cast<std::size_t>(batch_size), idx.size() - at));
    const MatrixXd logits = prob.eval_logits(params, batch);
    const auto y = gather(prob.labels, batch);
    loss += weighted_cross_entropy(logits, y, prob.class_weights).loss * static_cast<double>(batch.size());
    const auto pred = argmax_rows(logits);
    for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  }
  return {loss / static_cast<double>(idx.size()), static_cast<double>(correct) / static_cast<double>(idx.size())};
}

/// Mini-batch Adam with early stopping on validation loss. The training set
/// is reshuffled every epoch from (seed, epoch); dropout masks come from
/// (seed, epoch, batch).
inline TrainResult train(const Problem& prob, VectorXd params, std::span<const std::size_t> train_idx,
                         std::span<const std::size_t> val_idx, const TrainConfig& cfg) {
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw Error(Errc::invalid_config, "batch size, epochs and patience must be positive");
  if (!(cfg.adam.learning_rate > 0.0) || cfg.adam.weight_decay < 0.0)
    throw Error(Errc::invalid_config, "learning rate must be positive and weight decay non-negative");
  if (train_idx.empty()) throw Error(Errc::invalid_input, "empty training set");
  TrainResult res;
  res.best_params = params;
  AdamState state(params.size());
  VectorXd grad(params.size());
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    std::size_t batch_no = 0;
    try {
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size), ++batch_no) {
        const std::span<const std::size_t> batch(order.data() + at,
                                                 std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                                       order.size() - at));
        grad.setZero();
        const LossGrad lg = prob.train_step(params, batch, mix_seed(epoch_seed, batch_no), grad);
        if (!std::isfinite(lg.loss))
          throw Error(Errc::divergence, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                            std::to_string(batch_no + 1));
        train_loss += lg.loss * static_cast<double>(batch.size());
        adam_step(params, grad, state, cfg.adam);
      }
    } catch (const Error& e) {
      if (e.code() != Errc::divergence) throw;
      res.divergence = e.what();
      return res;
    }
    train_loss /= static_cast<double>(order.size());
    const auto [val_loss, val_acc] = evaluate_loss(prob, params, val_idx, cfg.batch_size);
    if (!std::isfinite(val_loss)) {
      res.divergence = "non-finite validation loss at epoch " + std::to_string(epoch);
      return res;
    }
    res.history.push_back({epoch, train_loss, val_loss, val_acc});
    res.epochs_run = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      res.best_params = params;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return res;
}

/// Frame-level problem: rows of `features` are examples. `features` must
/// outlive the problem.
inline Problem mlp_problem(const MlpShape& shape, const MatrixXd& features, std::vector<int> labels,
                           VectorXd class_weights) {
  Problem p;
  p.labels = std::move(labels);
  p.class_weights = std::move(class_weights);
  auto rows = [&features](std::span<const std::size_t> batch) {
    MatrixXd x(static_cast<Index>(batch.size()), features.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) x.row(static_cast<Index>(i)) = features.row(static_cast<Index>(batch[i]));
    return x;
  };
  p.train_step = [shape, rows, labels = p.labels, w = p.class_weights](
                     const VectorXd& params, std::span<const std::size_t> batch, std::uint64_t seed, VectorXd& grad) {
    MlpParams mp(shape);
    mp.values = params;
    MlpCache cache;
    const MatrixXd logits = mlp_forward(mp, rows(batch), Mode::train, seed, &cache);
    LossGrad lg = weighted_cross_entropy(logits, gather(labels, batch), w);
    grad = mlp_backward(mp, cache, lg.grad);
    return lg;
  };
  p.eval_logits = [shape, rows](const VectorXd& params, std::span<const std::size_t> batch) {
    MlpParams mp(shape);
    mp.values = params;
    return mlp_forward(mp, rows(batch), Mode::eval);
  };
  return p;
}

/// Gathers windows into a time-major batch.
inline SequenceBatch window_batch(const MatrixXd& features, const std::vector<WindowExample>& windows,
                                  std::span<const std::size_t> batch) {
  if (batch.empty()) return {};
  const std::size_t T = windows[batch.front()].rows.size();
  SequenceBatch xs(T, MatrixXd(static_cast<Index>(batch.size()), features.cols()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& w = windows[batch[b]];
    if (w.rows.size() != T) throw Error(Errc::shape, "windows in a batch must share one length");
    for (std::size_t t = 0; t < T; ++t) xs[t].row(static_cast<Index>(b)) = features.row(static_cast<Index>(w.rows[t]));
  }
  return xs;
}

/// Sequence problem: example i is windows[i]. `features` and `windows` must
/// outlive the problem.
inline Problem bilstm_problem(const BiLstmShape& shape, const MatrixXd& features,
                              const std::vector<WindowExample>& windows, VectorXd class_weights) {
  Problem p;
  for (const auto& w : windows) p.labels.push_back(w.label);
  p.class_weights = std::move(class_weights);
  p.train_step = [shape, &features, &windows, labels = p.labels, w = p.class_weights](
                     const VectorXd& params, std::span<const std::size_t> batch, std::uint64_t seed, VectorXd& grad) {
    BiLstmParams bp(shape);
    bp.values = params;
    BiLstmCache cache;
    const MatrixXd logits = bilstm_forward(bp, window_batch(features, windows, batch), Mode::train, seed, &cache);
    LossGrad lg = weighted_cross_entropy(logits, gather(labels, batch), w);
    grad = bilstm_backward(bp, cache, lg.grad);
    return lg;
  };
  p.eval_logits = [shape, &features, &windows](const VectorXd& params, std::span<const std::size_t> batch) {
    BiLstmParams bp(shape);
    bp.values = params;
    return bilstm_forward(bp, window_batch(features, windows, batch), Mode::eval);
  };
  return p;
}

}  // namespace herdpipe::learn
