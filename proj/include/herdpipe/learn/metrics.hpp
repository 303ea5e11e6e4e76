#pragma once

#include <span>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"

namespace herdpipe::learn {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  /// Class never appears in truth or predictions; its metrics are reported
  /// as zero.
  bool absent = false;
};

struct ClassificationReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total_support = 0;
  std::vector<std::vector<std::size_t>> confusion;  // rows = true class
};

inline ClassificationReport evaluate_classifier(std::span<const int> truth, std::span<const int> predicted,
                                                int num_classes, std::vector<std::string> class_names = {}) {
  if (truth.size() != predicted.size()) throw Error(Errc::shape, "truth/prediction length mismatch");
  if (num_classes < 1) throw Error(Errc::invalid_class, "need at least one class");
  const auto C = static_cast<std::size_t>(num_classes);
  ClassificationReport rep;
  if (class_names.empty())
    for (std::size_t c = 0; c < C; ++c) class_names.push_back("class_" + std::to_string(c));
  if (class_names.size() != C) throw Error(Errc::shape, "class name count mismatch");
  rep.class_names = std::move(class_names);
  rep.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) throw Error(Errc::invalid_class, "label out of range");
    ++rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  rep.total_support = truth.size();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t tp = rep.confusion[c][c], row = 0, col = 0;
    for (std::size_t k = 0; k < C; ++k) {
      row += rep.confusion[c][k];
      col += rep.confusion[k][c];
    }
    correct += tp;
    ClassMetrics m;
    m.support = row;
    m.absent = row == 0 && col == 0;
    m.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    rep.per_class.push_back(m);
  }
  if (rep.total_support > 0) {
    const double n = static_cast<double>(rep.total_support);
    rep.accuracy = static_cast<double>(correct) / n;
    for (const auto& m : rep.per_class) {
      const double w = static_cast<double>(m.support) / n;
      rep.weighted_precision += w * m.precision;
      rep.weighted_recall += w * m.recall;
      rep.weighted_f1 += w * m.f1;
    }
  }
  return rep;
}

}  // namespace herdpipe::learn
