#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/params.hpp"

namespace herdpipe::learn {

struct BiLstmShape {
  int input_dim = 1024;
  int hidden = 128;       // per direction
  int head_hidden = 128;
  int classes = 2;
  double dropout = 0.3;   // between the two head layers

  friend bool operator==(const BiLstmShape&, const BiLstmShape&) = default;
};

/// Gate blocks are packed [input | forget | candidate | output] along the
/// columns of wx (d x 4H), wh (H x 4H) and b (4H).
struct LstmBlocks {
  Block wx, wh, b;
};

struct BiLstmParams {
  BiLstmShape shape;
  LstmBlocks fwd, bwd;
  Block head_w1, head_b1, head_w2, head_b2;
  VectorXd values;

  explicit BiLstmParams(const BiLstmShape& s = {}) : shape(s) {
    if (s.input_dim < 1 || s.hidden < 1 || s.head_hidden < 1 || s.classes < 1)
      throw Error(Errc::shape, "BiLSTM dimensions must be positive");
    ParamLayout layout;
    for (LstmBlocks* dir : {&fwd, &bwd}) {
      dir->wx = layout.add(s.input_dim, 4 * s.hidden);
      dir->wh = layout.add(s.hidden, 4 * s.hidden);
      dir->b = layout.add(4 * s.hidden, 1);
    }
    head_w1 = layout.add(2 * s.hidden, s.head_hidden);
    head_b1 = layout.add(s.head_hidden, 1);
    head_w2 = layout.add(s.head_hidden, s.classes);
    head_b2 = layout.add(s.classes, 1);
    values = VectorXd::Zero(layout.size());
  }
};

inline BiLstmParams init_bilstm(const BiLstmShape& shape, std::uint64_t seed) {
  BiLstmParams p(shape);
  std::mt19937_64 rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  for (const LstmBlocks* dir : {&p.fwd, &p.bwd}) {
    fill_uniform(p.values, dir->wx, k, rng);
    fill_uniform(p.values, dir->wh, k, rng);
    fill_uniform(p.values, dir->b, k, rng);
  }
  const double k1 = 1.0 / std::sqrt(2.0 * shape.hidden), k2 = 1.0 / std::sqrt(static_cast<double>(shape.head_hidden));
  fill_uniform(p.values, p.head_w1, k1, rng);
  fill_uniform(p.values, p.head_b1, k1, rng);
  fill_uniform(p.values, p.head_w2, k2, rng);
  fill_uniform(p.values, p.head_b2, k2, rng);
  return p;
}

/// A batch of equal-length sequences, time-major: steps[t] is batch x d.
using SequenceBatch = std::vector<MatrixXd>;

struct LstmStep {
  MatrixXd x, h_prev, c_prev, i, f, g, o, c, tanh_c, h;
};

struct BiLstmCache {
  std::vector<LstmStep> fwd;  // processing order t = 0..T-1
  std::vector<LstmStep> bwd;  // processing order t = T-1..0
  MatrixXd rep, z1, m1, a1, logits;
};

namespace detail {

inline MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

inline std::vector<LstmStep> lstm_run(const VectorXd& v, const LstmBlocks& blk, int hidden, const SequenceBatch& xs,
                                      bool reverse) {
  const Index n = xs.front().rows();
  const Index H = hidden;
  std::vector<LstmStep> steps;
  steps.reserve(xs.size());
  MatrixXd h = MatrixXd::Zero(n, H), c = MatrixXd::Zero(n, H);
  const auto wx = view(v, blk.wx);
  const auto wh = view(v, blk.wh);
  const auto b = bias_row(v, blk.b);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto& x = xs[reverse ? xs.size() - 1 - s : s];
    MatrixXd gates = (x * wx + h * wh).rowwise() + b;
    LstmStep st;
    st.x = x;
    st.h_prev = h;
    st.c_prev = c;
    st.i = sigmoid(gates.leftCols(H));
    st.f = sigmoid(gates.middleCols(H, H));
    st.g = gates.middleCols(2 * H, H).array().tanh().matrix();
    st.o = sigmoid(gates.rightCols(H));
    st.c = st.f.cwiseProduct(c) + st.i.cwiseProduct(st.g);
    st.tanh_c = st.c.array().tanh().matrix();
    st.h = st.o.cwiseProduct(st.tanh_c);
    h = st.h;
    c = st.c;
    steps.push_back(std::move(st));
  }
  return steps;
}

/// Backpropagation through time. dh_out[s] is the loss gradient arriving at
/// the hidden output of processing step s (empty matrix = zero).
inline void lstm_backprop(const VectorXd& v, const LstmBlocks& blk, int hidden, const std::vector<LstmStep>& steps,
                          const std::vector<MatrixXd>& dh_out, VectorXd& grad) {
  const Index H = hidden;
  const Index n = steps.front().x.rows();
  auto gwx = view(grad, blk.wx);
  auto gwh = view(grad, blk.wh);
  auto gb = view(grad, blk.b);
  const auto wh = view(v, blk.wh);
  MatrixXd dh_next = MatrixXd::Zero(n, H), dc_next = MatrixXd::Zero(n, H);
  MatrixXd dgates(n, 4 * H);
  for (std::size_t s = steps.size(); s-- > 0;) {
    const auto& st = steps[s];
    MatrixXd dh = dh_next;
    if (dh_out[s].size() > 0) dh += dh_out[s];
    const MatrixXd d_o = dh.cwiseProduct(st.tanh_c);
    const MatrixXd dc =
        dc_next + dh.cwiseProduct(st.o).cwiseProduct((1.0 - st.tanh_c.array().square()).matrix());
    const MatrixXd di = dc.cwiseProduct(st.g);
    const MatrixXd dg = dc.cwiseProduct(st.i);
    const MatrixXd df = dc.cwiseProduct(st.c_prev);
    dc_next = dc.cwiseProduct(st.f);
    dgates.leftCols(H) = di.cwiseProduct(st.i).cwiseProduct((1.0 - st.i.array()).matrix());
    dgates.middleCols(H, H) = df.cwiseProduct(st.f).cwiseProduct((1.0 - st.f.array()).matrix());
    dgates.middleCols(2 * H, H) = dg.cwiseProduct((1.0 - st.g.array().square()).matrix());
    dgates.rightCols(H) = d_o.cwiseProduct(st.o).cwiseProduct((1.0 - st.o.array()).matrix());
    gwx.noalias() += st.x.transpose() * dgates;
    gwh.noalias() += st.h_prev.transpose() * dgates;
    gb += dgates.colwise().sum().transpose();
    dh_next = dgates * wh.transpose();
  }
}

}  // namespace detail

/// Runs both directions over the full sequence. The representation is the
/// concatenated output at the last time step: the forward state after input
/// T joined with the backward state after it has consumed only input T.
inline MatrixXd bilstm_forward(const BiLstmParams& p, const SequenceBatch& xs, Mode mode,
                               std::uint64_t dropout_seed = 0, BiLstmCache* cache = nullptr) {
  if (xs.empty()) throw Error(Errc::empty_sequence, "BiLSTM needs at least one time step");
  for (const auto& x : xs)
    if (x.cols() != p.shape.input_dim || x.rows() != xs.front().rows())
      throw Error(Errc::shape, "BiLSTM step has wrong shape");
  const Index n = xs.front().rows();
  const Index H = p.shape.hidden;
  auto fwd = detail::lstm_run(p.values, p.fwd, p.shape.hidden, xs, false);
  auto bwd = detail::lstm_run(p.values, p.bwd, p.shape.hidden, xs, true);
  MatrixXd rep(n, 2 * H);
  rep.leftCols(H) = fwd.back().h;
  rep.rightCols(H) = bwd.front().h;
  MatrixXd z1 = (rep * view(p.values, p.head_w1)).rowwise() + bias_row(p.values, p.head_b1);
  std::mt19937_64 rng(dropout_seed);
  MatrixXd m1 = mode == Mode::train ? dropout_mask(n, p.shape.head_hidden, p.shape.dropout, rng)
                                    : MatrixXd::Ones(n, p.shape.head_hidden);
  MatrixXd a1 = z1.cwiseMax(0.0).cwiseProduct(m1);
  MatrixXd logits = (a1 * view(p.values, p.head_w2)).rowwise() + bias_row(p.values, p.head_b2);
  if (cache) {
    cache->fwd = std::move(fwd);
    cache->bwd = std::move(bwd);
    cache->rep = std::move(rep);
    cache->z1 = std::move(z1);
    cache->m1 = std::move(m1);
    cache->a1 = std::move(a1);
    cache->logits = logits;
  }
  return logits;
}

inline VectorXd bilstm_backward(const BiLstmParams& p, const BiLstmCache& c, const MatrixXd& dlogits) {
  const Index H = p.shape.hidden;
  VectorXd g = VectorXd::Zero(p.values.size());
  view(g, p.head_w2) = c.a1.transpose() * dlogits;
  view(g, p.head_b2) = dlogits.colwise().sum().transpose();
  MatrixXd dz1 = (dlogits * view(p.values, p.head_w2).transpose()).cwiseProduct(c.m1);
  dz1 = (c.z1.array() > 0.0).select(dz1, 0.0);
  view(g, p.head_w1) = c.rep.transpose() * dz1;
  view(g, p.head_b1) = dz1.colwise().sum().transpose();
  const MatrixXd drep = dz1 * view(p.values, p.head_w1).transpose();

  std::vector<MatrixXd> dh_fwd(c.fwd.size()), dh_bwd(c.bwd.size());
  dh_fwd.back() = drep.leftCols(H);
  dh_bwd.front() = drep.rightCols(H);
  detail::lstm_backprop(p.values, p.fwd, p.shape.hidden, c.fwd, dh_fwd, g);
  detail::lstm_backprop(p.values, p.bwd, p.shape.hidden, c.bwd, dh_bwd, g);
  return g;
}

}  // namespace herdpipe::learn
