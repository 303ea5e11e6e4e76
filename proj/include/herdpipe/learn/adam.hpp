#pragma once

#include <cmath>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/params.hpp"

namespace herdpipe::learn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  VectorXd m;
  VectorXd v;
  long step = 0;

  explicit AdamState(Index n = 0) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}
};

/// One Adam update with bias correction. Weight decay is L2-coupled: it is
/// added to the gradient before the moment updates.
inline void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size()) throw Error(Errc::shape, "adam size mismatch");
  if (!grad.allFinite()) throw Error(Errc::divergence, "non-finite gradient at step " + std::to_string(state.step + 1));
  ++state.step;
  const VectorXd g = grad + cfg.weight_decay * params;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= cfg.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace herdpipe::learn
