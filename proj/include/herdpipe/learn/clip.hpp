#pragma once

#include <cmath>
#include <span>

#include "herdpipe/core/error.hpp"
#include "herdpipe/learn/loss.hpp"
#include "herdpipe/learn/params.hpp"

namespace herdpipe::learn {

struct ClipLoss {
  double loss = 0.0;
  double loss_image = 0.0;
  double loss_text = 0.0;
  MatrixXd grad_images;  // N x d
  MatrixXd grad_texts;   // N x d
};

namespace detail {

inline MatrixXd normalize_rows(const MatrixXd& x, VectorXd& norms, const char* what) {
  norms = x.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i)
    if (!(norms[i] > 0.0))
      throw Error(Errc::undefined_cosine, std::string(what) + " " + std::to_string(i) + " has zero norm");
  return norms.cwiseInverse().asDiagonal() * x;
}

/// Gradient through x -> x/|x| for every row.
inline MatrixXd unnormalize_grad(const MatrixXd& unit, const VectorXd& norms, const MatrixXd& g) {
  MatrixXd out = g - unit.cwiseProduct((unit.cwiseProduct(g)).rowwise().sum().replicate(1, g.cols()));
  return norms.cwiseInverse().asDiagonal() * out;
}

}  // namespace detail

/// Symmetric contrastive loss over N matched (image, text) pairs. Logits are
/// the cosine similarities multiplied by `tau`; the loss averages the
/// row-wise and column-wise cross-entropies against the diagonal.
inline ClipLoss clip_loss(const MatrixXd& images, const MatrixXd& texts, double tau) {
  if (images.rows() < 1 || images.rows() != texts.rows() || images.cols() != texts.cols())
    throw Error(Errc::shape, "clip batch needs N >= 1 matched pairs of equal dimension");
  if (!(tau > 0.0)) throw Error(Errc::invalid_config, "temperature must be positive");
  const Index n = images.rows();
  VectorXd ni, nt;
  const MatrixXd ui = detail::normalize_rows(images, ni, "image embedding");
  const MatrixXd ut = detail::normalize_rows(texts, nt, "text embedding");
  const MatrixXd logits = tau * (ui * ut.transpose());

  const MatrixXd prow = softmax_rows(logits);
  const MatrixXd pcol = softmax_rows(logits.transpose()).transpose();
  ClipLoss out;
  for (Index i = 0; i < n; ++i) {
    out.loss_image -= std::log(prow(i, i));
    out.loss_text -= std::log(pcol(i, i));
  }
  out.loss_image /= static_cast<double>(n);
  out.loss_text /= static_cast<double>(n);
  out.loss = 0.5 * (out.loss_image + out.loss_text);

  const MatrixXd eye = MatrixXd::Identity(n, n);
  const MatrixXd dlogits = 0.5 * ((prow - eye) + (pcol - eye)) / static_cast<double>(n);
  const MatrixXd dsim = tau * dlogits;
  out.grad_images = detail::unnormalize_grad(ui, ni, dsim * ut);
  out.grad_texts = detail::unnormalize_grad(ut, nt, dsim.transpose() * ui);
  return out;
}

/// Index of the class text embedding with the highest cosine similarity.
/// Similarities within 1e-12 of the maximum count as ties; the lowest index
/// wins.
inline int clip_zero_shot(const VectorXd& image, const MatrixXd& class_texts) {
  if (class_texts.rows() < 1 || class_texts.cols() != image.size())
    throw Error(Errc::shape, "class embeddings must be C x d with C >= 1");
  const double in = image.norm();
  if (!(in > 0.0)) throw Error(Errc::undefined_cosine, "image embedding has zero norm");
  VectorXd cos(class_texts.rows());
  for (Index c = 0; c < class_texts.rows(); ++c) {
    const double tn = class_texts.row(c).norm();
    if (!(tn > 0.0)) throw Error(Errc::undefined_cosine, "class " + std::to_string(c) + " text has zero norm");
    cos[c] = class_texts.row(c).dot(image) / (tn * in);
  }
  const double best = cos.maxCoeff();
  for (Index c = 0; c < cos.size(); ++c)
    if (cos[c] >= best - 1e-12) return static_cast<int>(c);
  return 0;
}

}  // namespace herdpipe::learn
