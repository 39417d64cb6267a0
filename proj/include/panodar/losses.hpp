#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "panodar/error.hpp"
#include "panodar/fusion.hpp"
#include "panodar/grid.hpp"

namespace panodar {

enum class Reduction { kSum, kMean };

/// Mean squared difference between two equally shaped grids, over all
/// C·H·W elements. Symmetric; zero iff the grids are element-wise equal.
inline double consistency_mse(const LogitsGrid& pred_i, const LogitsGrid& pred_j) {
  if (pred_i.classes() != pred_j.classes() || pred_i.height() != pred_j.height() ||
      pred_i.width() != pred_j.width()) {
    throw InvalidInputError("consistency_mse: grid dimensions differ");
  }
  const std::span<const float> a = pred_i.values();
  const std::span<const float> b = pred_j.values();
  double acc = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

namespace detail {

/// -log softmax(pred at pixel p)[target], via the max-subtracted
/// log-sum-exp. exp evaluated in float, accumulation in double.
inline double pixel_ce(const LogitsGrid& pred, size_t p, int target) {
  const size_t plane = pred.pixel_count();
  const std::span<const float> v = pred.values();
  float mx = v[p];
  for (int c = 1; c < pred.classes(); ++c) mx = std::max(mx, v[p + c * plane]);
  double sum = 0.0;
  for (int c = 0; c < pred.classes(); ++c) {
    sum += static_cast<double>(std::exp(v[p + c * plane] - mx));
  }
  return static_cast<double>(mx) - static_cast<double>(v[p + static_cast<size_t>(target) * plane]) +
         std::log(sum);
}

}  // namespace detail

/// Per-pixel cross-entropy of softmaxed predictions against hard target
/// labels, with an optional binary weight map that adds lambda-scaled
/// emphasis: sum_k [ CE_k + lambda * M_k * CE_k ].
inline double cross_entropy(const LogitsGrid& pred, const LabelMap& targets,
                            const WeightMap* weights, double lambda,
                            Reduction reduction = Reduction::kSum) {
  if (pred.height() != targets.height() || pred.width() != targets.width()) {
    throw InvalidInputError("cross_entropy: prediction and target dimensions differ");
  }
  if (weights != nullptr &&
      (weights->height() != pred.height() || weights->width() != pred.width())) {
    throw InvalidInputError("cross_entropy: weight map dimensions differ");
  }
  const size_t pixels = pred.pixel_count();
  const std::span<const uint16_t> t = targets.labels();
  double acc = 0.0;
  for (size_t p = 0; p < pixels; ++p) {
    if (t[p] >= pred.classes()) {
      throw InvalidInputError("cross_entropy: target label " + std::to_string(t[p]) +
                              " exceeds class count " + std::to_string(pred.classes()));
    }
    const double ce = detail::pixel_ce(pred, p, t[p]);
    acc += ce;
    if (weights != nullptr) {
      acc += lambda * static_cast<double>(weights->weights()[p]) * ce;
    }
  }
  return reduction == Reduction::kMean ? acc / static_cast<double>(pixels) : acc;
}

/// Full scalar report of the adaptation loss stack. The two totals are the
/// plain left-to-right sums of their components.
struct LossReport {
  double l_cc = 0.0;        // overlap consistency between adjacent windows
  double l_ce_ta_s = 0.0;   // whole-image CE, student vs TA map
  double l_ce_t_s = 0.0;    // weighted window CE, student vs ensemble
  double l_ce_t_ta = 0.0;   // weighted window CE, TA vs ensemble
  double l_bd_t_ta = 0.0;   // boundary loss supervising the TA
  double l_bd_t_s = 0.0;    // boundary loss supervising the student
  double l_student_total = 0.0;
  double l_ta_total = 0.0;
  double lambda = 0.2;

  void finalize() {
    l_student_total = student_total(l_ce_ta_s, l_ce_t_s, l_bd_t_s);
    l_ta_total = ta_total(l_ce_t_ta, l_cc, l_bd_t_ta);
  }

  static double student_total(double ce_ta_s, double ce_t_s, double bd_t_s) {
    return ce_ta_s + ce_t_s + bd_t_s;
  }

  static double ta_total(double ce_t_ta, double cc, double bd_t_ta) {
    return ce_t_ta + cc + bd_t_ta;
  }
};

}  // namespace panodar
