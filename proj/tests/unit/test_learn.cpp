#include <catch_amalgamated.hpp>

#include <random>

#include "herdpipe/learn/adam.hpp"
#include "herdpipe/learn/bilstm.hpp"
#include "herdpipe/learn/checkpoint.hpp"
#include "herdpipe/learn/clip.hpp"
#include "herdpipe/learn/loss.hpp"
#include "herdpipe/learn/metrics.hpp"
#include "herdpipe/learn/mlp.hpp"
#include "herdpipe/learn/split.hpp"
#include "herdpipe/learn/train.hpp"
#include "herdpipe/learn/windows.hpp"
#include "test_support.hpp"

using namespace herdpipe;
using namespace herdpipe::learn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no herdpipe::Error thrown");
  return Errc::io;
}

MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0, scale);
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
  return y;
}

std::map<std::string, std::vector<FrameSample>> stream(const std::vector<int>& labels, const std::string& id = "p") {
  std::map<std::string, std::vector<FrameSample>> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[id].push_back({FrameIndex(i + 1), i, labels[i]});
  return m;
}

}  // namespace

// ---- class weights and loss ----------------------------------------------

TEST_CASE("class weights examples") {
  const std::vector<std::size_t> eq{5, 5, 5, 5};
  for (Index i = 0; i < 4; ++i) CHECK_THAT(class_weights(eq)[i], WithinAbs(0.25, 1e-15));
  const std::vector<std::size_t> c{1, 1, 2};
  const auto w = class_weights(c);
  CHECK_THAT(w[0], WithinAbs(0.4, 1e-15));
  CHECK_THAT(w[1], WithinAbs(0.4, 1e-15));
  CHECK_THAT(w[2], WithinAbs(0.2, 1e-15));
  const std::vector<std::size_t> ds{638, 15256};
  const auto w2 = class_weights(ds);
  CHECK_THAT(w2[0], WithinAbs(0.9599, 1e-4));
  CHECK_THAT(w2[1], WithinAbs(0.0401, 1e-4));
  CHECK(code_of([] {
          const std::vector<std::size_t> z{3, 0};
          class_weights(z);
        }) == Errc::invalid_class);
}

TEST_CASE("class weights sum to one and follow a permutation") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::size_t> c(2 + rng() % 6);
    for (auto& v : c) v = 1 + rng() % 500;
    const auto w = class_weights(c);
    CHECK_THAT(w.sum(), WithinAbs(1.0, 1e-12));
    auto p = c;
    std::reverse(p.begin(), p.end());
    const auto wp = class_weights(p);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK_THAT(wp[Index(c.size() - 1 - k)], WithinAbs(w[Index(k)], 1e-15));
  }
}

TEST_CASE("weighted cross entropy examples") {
  const std::vector<int> y{0};
  const VectorXd ones = VectorXd::Ones(2);
  CHECK_THAT(weighted_cross_entropy(MatrixXd::Zero(1, 2), y, ones).loss, WithinAbs(std::log(2.0), 1e-15));
  MatrixXd sat = MatrixXd::Zero(1, 3);
  sat(0, 0) = 30;
  CHECK(weighted_cross_entropy(sat, y, VectorXd::Ones(3)).loss < 1e-12);
}

TEST_CASE("weighted cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd logits = random_matrix(7, 5, rng, 2.0);
    const auto y = random_labels(7, 5, rng);
    VectorXd w(5);
    for (Index i = 0; i < 5; ++i) w[i] = 0.1 + double(rng() % 100) / 100;
    const auto lg = weighted_cross_entropy(logits, y, w);
    auto f = [&](const VectorXd& v) { return weighted_cross_entropy(ConstMatMap(v.data(), 7, 5), y, w).loss; };
    const VectorXd x = Eigen::Map<const VectorXd>(logits.data(), logits.size());
    const VectorXd g = Eigen::Map<const VectorXd>(lg.grad.data(), lg.grad.size());
    CHECK(testing::gradient_error(f, x, g) <= 1e-4);
  }
}

// ---- MLP ------------------------------------------------------------------

TEST_CASE("MLP with zero parameters gives uniform softmax") {
  MlpParams p(MlpShape{6, 5, 4, 3, 0.5});
  std::mt19937_64 rng(1);
  const MatrixXd logits = mlp_forward(p, random_matrix(4, 6, rng), Mode::eval);
  CHECK(logits.isZero(0));
  CHECK(softmax_rows(logits).isApproxToConstant(1.0 / 3, 1e-15));
}

TEST_CASE("MLP rejects a batch of the wrong width") {
  MlpParams p(MlpShape{6, 5, 4, 3, 0.5});
  CHECK(code_of([&] { mlp_forward(p, MatrixXd::Zero(2, 7), Mode::eval); }) == Errc::shape);
}

TEST_CASE("MLP default shape is 1024-512-256 with dropout 0.5") {
  const MlpParams p{};
  CHECK(p.w1.rows == 1024);
  CHECK(p.w1.cols == 512);
  CHECK(p.w2.cols == 256);
  CHECK(p.shape.dropout == 0.5);
}

TEST_CASE("inverted dropout preserves hidden activations in expectation") {
  const MlpShape shape{5, 16, 8, 2, 0.5};
  auto p = init_mlp(shape, 4);
  std::mt19937_64 rng(3);
  const MatrixXd x = random_matrix(1, 5, rng);
  MlpCache eval;
  mlp_forward(p, x, Mode::eval, 0, &eval);
  MatrixXd mean = MatrixXd::Zero(1, 16);
  const int n = 40000;
  for (int s = 0; s < n; ++s) {
    MlpCache c;
    mlp_forward(p, x, Mode::train, static_cast<std::uint64_t>(s) + 1, &c);
    mean += c.h1;
  }
  mean /= n;
  for (Index k = 0; k < 16; ++k) {
    const double ref = std::max(0.0, eval.z1(0, k));
    if (ref > 1e-3) CHECK(std::abs(mean(0, k) - ref) <= 0.02 * ref + 1e-3);
    else CHECK(std::abs(mean(0, k)) <= 1e-3);
  }
}

TEST_CASE("MLP gradients match finite differences with fixed dropout masks") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const MlpShape shape{4 + trial, 6, 5, 3, 0.5};
    auto p = init_mlp(shape, 100 + static_cast<std::uint64_t>(trial));
    const MatrixXd x = random_matrix(6, shape.input_dim, rng);
    const auto y = random_labels(6, 3, rng);
    const VectorXd w = VectorXd::Constant(3, 1.0 / 3);
    MlpCache cache;
    const auto lg = weighted_cross_entropy(mlp_forward(p, x, Mode::train, 77, &cache), y, w);
    const VectorXd g = mlp_backward(p, cache, lg.grad);
    auto f = [&](const VectorXd& v) {
      MlpParams q = p;
      q.values = v;
      return weighted_cross_entropy(mlp_forward(q, x, Mode::train, 77), y, w).loss;
    };
    CHECK(testing::gradient_error(f, p.values, g) <= 1e-4);
  }
}

// ---- BiLSTM ---------------------------------------------------------------

TEST_CASE("BiLSTM on one step sees the same input in both directions") {
  const BiLstmShape shape{3, 4, 5, 2, 0.3};
  auto p = init_bilstm(shape, 2);
  // make both directions identical
  const Index per_dir = p.fwd.wx.size() + p.fwd.wh.size() + p.fwd.b.size();
  p.values.segment(p.bwd.wx.offset, per_dir) = p.values.segment(p.fwd.wx.offset, per_dir);
  std::mt19937_64 rng(1);
  BiLstmCache c;
  bilstm_forward(p, {random_matrix(2, 3, rng)}, Mode::eval, 0, &c);
  REQUIRE(c.rep.cols() == 8);
  CHECK(c.rep.leftCols(4).isApprox(c.rep.rightCols(4), 1e-15));
}

TEST_CASE("BiLSTM with zero gates emits the head bias") {
  const BiLstmShape shape{3, 4, 5, 2, 0.3};
  BiLstmParams p(shape);
  view(p.values, p.head_b2)(0, 0) = 0.25;
  view(p.values, p.head_b2)(1, 0) = -1.5;
  std::mt19937_64 rng(1);
  BiLstmCache c;
  const MatrixXd logits = bilstm_forward(p, {random_matrix(2, 3, rng), random_matrix(2, 3, rng)}, Mode::eval, 0, &c);
  CHECK(c.rep.isZero(0));
  CHECK(logits(0, 0) == 0.25);
  CHECK(logits(1, 1) == -1.5);
}

TEST_CASE("BiLSTM rejects empty sequences") {
  BiLstmParams p(BiLstmShape{3, 4, 5, 2, 0.3});
  CHECK(code_of([&] { bilstm_forward(p, {}, Mode::eval); }) == Errc::empty_sequence);
}

TEST_CASE("BiLSTM backpropagation through time matches finite differences") {
  const BiLstmShape shape{8, 4, 5, 3, 0.3};
  auto p = init_bilstm(shape, 9);
  p.values *= 3.0;  // larger weights exercise saturation
  std::mt19937_64 rng(5);
  SequenceBatch xs;
  for (int t = 0; t < 5; ++t) xs.push_back(random_matrix(3, 8, rng));
  const auto y = random_labels(3, 3, rng);
  const VectorXd w = VectorXd::Constant(3, 1.0 / 3);
  BiLstmCache cache;
  const auto lg = weighted_cross_entropy(bilstm_forward(p, xs, Mode::train, 42, &cache), y, w);
  const VectorXd g = bilstm_backward(p, cache, lg.grad);
  auto f = [&](const VectorXd& v) {
    BiLstmParams q = p;
    q.values = v;
    return weighted_cross_entropy(bilstm_forward(q, xs, Mode::train, 42), y, w).loss;
  };
  CHECK(testing::gradient_error(f, p.values, g) <= 1e-4);
}

// ---- Adam -----------------------------------------------------------------

TEST_CASE("Adam leaves parameters alone for a zero gradient") {
  VectorXd th = VectorXd::Constant(3, 0.7);
  AdamState s(3);
  adam_step(th, VectorXd::Zero(3), s, AdamConfig{1e-3, 0.0});
  CHECK(th == VectorXd::Constant(3, 0.7));
}

TEST_CASE("Adam single step on theta squared") {
  VectorXd th = VectorXd::Constant(1, 1.0);
  AdamState s(1);
  adam_step(th, 2.0 * th, s, AdamConfig{1e-3, 0.0});
  CHECK_THAT(th[0], WithinAbs(0.999, 1e-9));
}

TEST_CASE("Adam couples weight decay into the gradient") {
  VectorXd a = VectorXd::Constant(1, 1.0), b = a;
  AdamState sa(1), sb(1);
  for (int i = 0; i < 5; ++i) {
    adam_step(a, VectorXd::Constant(1, 0.3), sa, AdamConfig{1e-2, 0.2});
    adam_step(b, VectorXd::Constant(1, 0.3) + 0.2 * b, sb, AdamConfig{1e-2, 0.0});
  }
  CHECK_THAT(a[0], WithinAbs(b[0], 1e-15));
}

TEST_CASE("Adam decreases a convex quadratic and rejects non-finite gradients") {
  std::mt19937_64 rng(4);
  const MatrixXd a = random_matrix(6, 6, rng);
  const MatrixXd q = a.transpose() * a + MatrixXd::Identity(6, 6);
  VectorXd th = VectorXd::Ones(6);
  auto loss = [&](const VectorXd& v) { return 0.5 * v.dot(q * v); };
  const double start = loss(th);
  AdamState s(6);
  for (int i = 0; i < 200; ++i) adam_step(th, q * th, s, AdamConfig{1e-2, 0.0});
  CHECK(loss(th) < start);
  VectorXd bad = VectorXd::Constant(6, std::nan(""));
  CHECK(code_of([&] { adam_step(th, bad, s, AdamConfig{}); }) == Errc::divergence);
}

// ---- split ----------------------------------------------------------------

TEST_CASE("stratified split of two balanced classes") {
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) y[i] = i % 2;
  const auto s = stratified_split(y, kDefaultSplit, 5);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 15);
  CHECK(s.test.size() == 15);
  std::array<int, 2> tr{}, va{};
  for (auto i : s.train) ++tr[y[i]];
  for (auto i : s.val) ++va[y[i]];
  CHECK(tr == std::array<int, 2>{35, 35});
  CHECK(((va == std::array<int, 2>{7, 8}) || (va == std::array<int, 2>{8, 7})));
}

TEST_CASE("stratified split of a single class of ten") {
  const std::vector<int> y(10, 0);
  const auto s = stratified_split(y);
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() + s.test.size() == 3);
  CHECK(s.val.size() >= 1);
  CHECK(s.test.size() >= 1);
}

TEST_CASE("stratified split is disjoint, exhaustive and deterministic") {
  std::mt19937_64 rng(8);
  const auto y = random_labels(500, 4, rng);
  const auto a = stratified_split(y, kDefaultSplit, 3), b = stratified_split(y, kDefaultSplit, 3);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::vector<std::size_t> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(500);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  std::array<int, 4> count{}, tr{};
  for (int v : y) ++count[v];
  for (auto i : a.train) ++tr[y[i]];
  for (int k = 0; k < 4; ++k) CHECK(std::abs(tr[k] - 0.7 * count[k]) <= 1.0);
}

TEST_CASE("stratified split names a class that is too small") {
  const std::vector<int> y{0, 0, 0, 0, 1, 1};
  try {
    stratified_split(y);
    FAIL("expected stratification error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::stratification);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

// ---- windows --------------------------------------------------------------

TEST_CASE("sliding windows over a constant stream") {
  const auto w = sliding_windows(stream(std::vector<int>(10, 2)), WindowConfig{4, 2, 0.5});
  REQUIRE(w.size() == 4);
  for (const auto& x : w) {
    CHECK(x.label == 2);
    CHECK(x.rows.size() == 4);
  }
  CHECK(w[1].first_frame == 3);
}

TEST_CASE("sliding windows discard ties under a strict majority") {
  CHECK(sliding_windows(stream({0, 0, 1, 1}), WindowConfig{4, 1, 0.5}).empty());
  const auto w = sliding_windows(stream({0, 0, 0, 1}), WindowConfig{4, 1, 0.5});
  REQUIRE(w.size() == 1);
  CHECK(w[0].label == 0);
}

TEST_CASE("sliding windows do not span unlabeled frames or identities") {
  auto m = stream({0, 0, 0, -1, 0, 0, 0, 0});
  const auto other = stream({1, 1, 1, 1}, "q");
  m.insert(other.begin(), other.end());
  const auto w = sliding_windows(m, WindowConfig{4, 1, 0.5});
  REQUIRE(w.size() == 2);
  CHECK(w[0].identity == "p");
  CHECK(w[0].first_frame == 5);
  CHECK(w[1].identity == "q");
}

// ---- metrics --------------------------------------------------------------

TEST_CASE("classification report from a known confusion matrix") {
  const std::vector<int> truth{0, 0, 0, 1, 1, 1}, pred{0, 0, 1, 1, 1, 1};
  const auto r = evaluate_classifier(truth, pred, 2, {"a", "b"});
  CHECK(r.per_class[0].precision == 1.0);
  CHECK_THAT(r.per_class[0].recall, WithinAbs(2.0 / 3, 1e-15));
  CHECK(r.per_class[1].precision == 0.75);
  CHECK(r.per_class[1].recall == 1.0);
  CHECK_THAT(r.accuracy, WithinAbs(5.0 / 6, 1e-15));
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{2, 1}, {0, 3}});
}

TEST_CASE("classification report on perfect predictions and absent classes") {
  const std::vector<int> y{0, 1, 1, 2};
  const auto r = evaluate_classifier(y, y, 4);
  CHECK(r.accuracy == 1.0);
  for (int k = 0; k < 3; ++k) CHECK(r.per_class[k].f1 == 1.0);
  CHECK(r.per_class[3].absent);
  CHECK(r.per_class[3].f1 == 0.0);
  CHECK(r.weighted_f1 == 1.0);
}

TEST_CASE("weighted averages agree with a recomputation from the confusion matrix") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    const auto y = random_labels(80, 5, rng), p = random_labels(80, 5, rng);
    const auto r = evaluate_classifier(y, p, 5);
    double wp = 0, wr = 0, wf = 0, n = 0;
    for (int k = 0; k < 5; ++k) {
      double tp = double(r.confusion[k][k]), row = 0, col = 0;
      for (int j = 0; j < 5; ++j) row += double(r.confusion[k][j]), col += double(r.confusion[j][k]);
      const double prec = col > 0 ? tp / col : 0, rec = row > 0 ? tp / row : 0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
      wp += row * prec, wr += row * rec, wf += row * f1, n += row;
    }
    CHECK_THAT(r.weighted_precision, WithinAbs(wp / n, 1e-12));
    CHECK_THAT(r.weighted_recall, WithinAbs(wr / n, 1e-12));
    CHECK_THAT(r.weighted_f1, WithinAbs(wf / n, 1e-12));
  }
}

// ---- CLIP -----------------------------------------------------------------

TEST_CASE("CLIP loss examples") {
  std::mt19937_64 rng(1);
  const MatrixXd one = random_matrix(1, 4, rng);
  CHECK(clip_loss(one, random_matrix(1, 4, rng), 1.0).loss == 0.0);
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const auto l = clip_loss(eye, eye, 1.0);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK_THAT(l.loss, WithinAbs(expect, 1e-12));
  CHECK_THAT(l.loss, WithinAbs(0.3133, 1e-4));
  CHECK(code_of([] { clip_loss(MatrixXd::Zero(2, 3), MatrixXd::Ones(2, 3), 1.0); }) == Errc::undefined_cosine);
}

TEST_CASE("CLIP loss gradients match finite differences") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 5; ++t) {
    const Index n = 2 + t, d = 3 + t;
    const MatrixXd im = random_matrix(n, d, rng), tx = random_matrix(n, d, rng);
    const double tau = 0.5 + t;
    const auto l = clip_loss(im, tx, tau);
    VectorXd x(2 * n * d), g(2 * n * d);
    x << Eigen::Map<const VectorXd>(im.data(), n * d), Eigen::Map<const VectorXd>(tx.data(), n * d);
    g << Eigen::Map<const VectorXd>(l.grad_images.data(), n * d), Eigen::Map<const VectorXd>(l.grad_texts.data(), n * d);
    auto f = [&](const VectorXd& v) {
      return clip_loss(ConstMatMap(v.data(), n, d), ConstMatMap(v.data() + n * d, n, d), tau).loss;
    };
    CHECK(testing::gradient_error(f, x, g) <= 1e-4);
  }
}

TEST_CASE("CLIP zero-shot picks the most similar class") {
  MatrixXd texts = MatrixXd::Identity(3, 3);
  CHECK(clip_zero_shot(texts.row(2).transpose(), texts) == 2);
  const VectorXd img = (VectorXd(3) << 0.3, 2.0, 0.1).finished();
  CHECK(clip_zero_shot(img, texts) == clip_zero_shot(img * 17.0, texts));
  // cosines (0.2, 0.9, 0.9): the tie goes to the lower index
  const double s = std::sqrt(1 - 0.81);
  MatrixXd t2(3, 2);
  t2 << 0.2, std::sqrt(1 - 0.04), 0.9, s, 0.9, -s;
  CHECK(clip_zero_shot((VectorXd(2) << 1, 0).finished(), t2) == 1);
  CHECK(code_of([&] { clip_zero_shot(VectorXd::Zero(3), texts); }) == Errc::undefined_cosine);
}

// ---- training -------------------------------------------------------------

TEST_CASE("MLP separates two Gaussian classes") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 1);
  const int n = 200, d = 32;
  MatrixXd x(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 2;
    for (int k = 0; k < d; ++k) x(i, k) = g(rng) + (y[i] ? 1.5 : -1.5);
  }
  const MlpShape shape{d, 512, 256, 2, 0.5};
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const std::vector<std::size_t> counts{100, 100};
  const auto prob = mlp_problem(shape, x, y, class_weights(counts));
  TrainConfig cfg;
  cfg.seed = 1;
  const auto res = train(prob, init_mlp(shape, 1).values, all, all, cfg);
  MlpParams p(shape);
  p.values = res.best_params;
  const auto pred = argmax_rows(mlp_forward(p, x, Mode::eval));
  int ok = 0;
  for (int i = 0; i < n; ++i) ok += pred[i] == y[i];
  CHECK(ok == n);
}

TEST_CASE("early stopping on a steadily worsening validation loss") {
  // One parameter pushed upward by every step; validation loss grows with it.
  Problem prob;
  prob.labels.assign(20, 0);
  prob.class_weights = VectorXd::Constant(2, 0.5);
  prob.train_step = [](const VectorXd& p, std::span<const std::size_t>, std::uint64_t, VectorXd& grad) {
    grad[0] = -1.0;
    return LossGrad{-p[0], MatrixXd()};
  };
  prob.eval_logits = [](const VectorXd& p, std::span<const std::size_t> b) {
    MatrixXd l = MatrixXd::Zero(Index(b.size()), 2);
    l.col(1).setConstant(p[0]);
    return l;
  };
  std::vector<std::size_t> tr(10), va(10);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(va.begin(), va.end(), 10);
  TrainConfig cfg;
  cfg.adam.weight_decay = 0;
  cfg.batch_size = 5;
  const auto res = train(prob, VectorXd::Zero(1), tr, va, cfg);
  CHECK(res.epochs_run == 11);
  CHECK(res.best_epoch == 1);
  REQUIRE(res.history.size() == 11);
  for (std::size_t e = 1; e < res.history.size(); ++e) CHECK(res.history[e].val_loss > res.history[e - 1].val_loss);
  CHECK_THAT(res.best_params[0], WithinAbs(2 * 1e-3, 1e-8));  // two Adam steps of size lr
}

TEST_CASE("training is reproducible for a fixed seed") {
  std::mt19937_64 rng(30);
  const MatrixXd x = random_matrix(60, 6, rng);
  const auto y = random_labels(60, 3, rng);
  const MlpShape shape{6, 8, 4, 3, 0.5};
  const auto prob = mlp_problem(shape, x, y, VectorXd::Constant(3, 1.0 / 3));
  std::vector<std::size_t> tr(40), va(20);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(va.begin(), va.end(), 40);
  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.batch_size = 16;
  cfg.seed = 4;
  const auto a = train(prob, init_mlp(shape, 2).values, tr, va, cfg);
  const auto b = train(prob, init_mlp(shape, 2).values, tr, va, cfg);
  CHECK(a.best_params == b.best_params);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].val_loss == b.history[i].val_loss);
}

TEST_CASE("training stops with a divergence diagnostic") {
  Problem prob;
  prob.labels.assign(4, 0);
  prob.class_weights = VectorXd::Ones(2);
  prob.train_step = [](const VectorXd&, std::span<const std::size_t>, std::uint64_t, VectorXd&) {
    return LossGrad{std::nan(""), MatrixXd()};
  };
  prob.eval_logits = [](const VectorXd&, std::span<const std::size_t> b) { return MatrixXd::Zero(Index(b.size()), 2); };
  const std::vector<std::size_t> tr{0, 1}, va{2, 3};
  const auto res = train(prob, VectorXd::Zero(1), tr, va, TrainConfig{});
  REQUIRE(res.divergence);
  CHECK(res.divergence->find("epoch 1") != std::string::npos);
}

// ---- checkpoints ----------------------------------------------------------

TEST_CASE("checkpoint round trip is bit-exact") {
  testing::TempDir tmp;
  const auto mlp = init_mlp(MlpShape{5, 7, 3, 4, 0.5}, 3);
  const auto ck = make_checkpoint(mlp, io::json{{"seed", 3}, {"class_names", {"a", "b", "c", "d"}}});
  write_checkpoint(tmp / "m.mdl", ck);
  const auto back = read_checkpoint(tmp / "m.mdl");
  CHECK(back.kind == ModelKind::mlp);
  CHECK(back.shape == std::vector<std::uint32_t>{5, 7, 3, 4});
  CHECK(back.params == mlp.values);
  CHECK(back.config["class_names"][2] == "c");
  CHECK(mlp_from_checkpoint(back).values == mlp.values);
  const auto bytes = io::read_bytes(tmp / "m.mdl");
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MDL1");

  const auto lstm = init_bilstm(BiLstmShape{4, 3, 5, 2, 0.3}, 8);
  const auto back2 = decode_checkpoint(encode_checkpoint(make_checkpoint(lstm, io::json::object())));
  CHECK(back2.kind == ModelKind::bilstm);
  const auto restored = bilstm_from_checkpoint(back2);
  CHECK(restored.values == lstm.values);
  CHECK(restored.shape == lstm.shape);
}

TEST_CASE("checkpoint decoding rejects damage") {
  auto bytes = encode_checkpoint(make_checkpoint(init_mlp(MlpShape{2, 2, 2, 2, 0.5}, 1), io::json::object()));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), Error);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(bytes), Error);
}
