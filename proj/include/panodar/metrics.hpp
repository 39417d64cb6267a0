#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panodar/error.hpp"
#include "panodar/grid.hpp"

namespace panodar {

/// C×C pixel confusion counts. Rows index ground truth, columns index the
/// prediction. 64-bit counters; pixels labeled kIgnoreLabel in the ground
/// truth are skipped. Per-image matrices merge by element-wise addition.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes) : classes_(classes) {
    if (classes < 2) throw InvalidInputError("ConfusionMatrix: need at least 2 classes");
    counts_.assign(static_cast<size_t>(classes) * classes, 0);
  }

  int classes() const { return classes_; }
  uint64_t at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * classes_ + pred]; }
  uint64_t& at(int gt, int pred) { return counts_[static_cast<size_t>(gt) * classes_ + pred]; }

  uint64_t total() const {
    uint64_t n = 0;
    for (uint64_t v : counts_) n += v;
    return n;
  }

  ConfusionMatrix& merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw InvalidInputError("ConfusionMatrix: class count differs");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

 private:
  int classes_;
  std::vector<uint64_t> counts_;
};

/// Adds one image's pixel pairs to the matrix. Ground-truth ignore pixels
/// are skipped; any other out-of-range label is an error.
inline void accumulate(ConfusionMatrix& cm, const LabelMap& gt, const LabelMap& pred) {
  if (gt.height() != pred.height() || gt.width() != pred.width()) {
    throw InvalidInputError("accumulate: ground truth is " + std::to_string(gt.width()) + "x" +
                            std::to_string(gt.height()) + ", prediction is " +
                            std::to_string(pred.width()) + "x" + std::to_string(pred.height()));
  }
  const std::span<const uint16_t> g = gt.labels();
  const std::span<const uint16_t> p = pred.labels();
  for (size_t i = 0; i < g.size(); ++i) {
    if (g[i] == kIgnoreLabel) continue;
    if (g[i] >= cm.classes()) {
      throw InvalidInputError("accumulate: ground-truth label " + std::to_string(g[i]) +
                              " exceeds class count");
    }
    if (p[i] >= cm.classes()) {
      throw InvalidInputError("accumulate: predicted label " + std::to_string(p[i]) +
                              " exceeds class count");
    }
    ++cm.at(g[i], p[i]);
  }
}

/// TP / (TP + FP + FN) per class; empty when the denominator is zero
/// (class absent from both ground truth and prediction).
inline std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  const int c = cm.classes();
  std::vector<uint64_t> row(c, 0), col(c, 0);
  for (int g = 0; g < c; ++g) {
    for (int p = 0; p < c; ++p) {
      row[g] += cm.at(g, p);
      col[p] += cm.at(g, p);
    }
  }
  std::vector<std::optional<double>> out(c);
  for (int k = 0; k < c; ++k) {
    const uint64_t tp = cm.at(k, k);
    const uint64_t denom = row[k] + col[k] - tp;  // TP + FP + FN
    if (denom > 0) out[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

/// Arithmetic mean over classes whose IoU is defined.
inline double mean_iou(const ConfusionMatrix& cm) {
  const auto ious = iou_per_class(cm);
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : ious) {
    if (v.has_value()) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) throw DegenerateInputError("mean_iou: no class has a defined IoU");
  return sum / defined;
}

}  // namespace panodar
