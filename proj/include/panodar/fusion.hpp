#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "panodar/error.hpp"
#include "panodar/grid.hpp"

namespace panodar {

/// One binary H×W instance mask. Stored dense (0/1 bytes).
struct InstanceMask {
  std::vector<uint8_t> on;  // H*W, row-major

  size_t popcount() const {
    size_t n = 0;
    for (uint8_t v : on) n += v;
    return n;
  }
};

/// Ordered collection of binary instance masks for one window. Masks may
/// overlap each other; each must be non-empty.
class InstanceMaskSet {
 public:
  InstanceMaskSet(int height, int width) : height_(height), width_(width) {
    if (height < 1 || width < 1) throw InvalidInputError("InstanceMaskSet: bad dimensions");
  }

  void add(InstanceMask mask) {
    if (mask.on.size() != static_cast<size_t>(height_) * width_) {
      throw InvalidInputError("InstanceMaskSet: mask size does not match " +
                              std::to_string(height_) + "x" + std::to_string(width_));
    }
    const size_t area = mask.popcount();
    if (area == 0) throw InvalidInputError("InstanceMaskSet: empty mask rejected");
    masks_.push_back(std::move(mask));
    areas_.push_back(area);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  size_t count() const { return masks_.size(); }
  const InstanceMask& mask(size_t i) const { return masks_[i]; }
  size_t area(size_t i) const { return areas_[i]; }

 private:
  int height_;
  int width_;
  std::vector<InstanceMask> masks_;
  std::vector<size_t> areas_;
};

/// Area-dependent coverage thresholds for label assignment. Medium-sized
/// masks (area within [medium_area_min, medium_area_max], inclusive) use
/// the stricter theta_medium; everything else theta_default.
struct FusionConfig {
  double theta_default = 0.5;
  double theta_medium = 0.7;
  size_t medium_area_min = 100;
  size_t medium_area_max = 1000;

  /// Candidate labels considered by the entropy fallback.
  static constexpr int kTopK = 3;

  void validate() const {
    if (!(theta_default >= 0.0 && theta_default <= 1.0)) {
      throw ConfigValueError("theta_default must be in [0, 1]");
    }
    if (!(theta_medium >= theta_default && theta_medium <= 1.0)) {
      throw ConfigValueError("theta_medium must be in [theta_default, 1]");
    }
    if (medium_area_min >= medium_area_max) {
      throw ConfigValueError("medium_area must satisfy min < max");
    }
  }
};

/// Binary per-pixel confidence weights: 1 on pixels owned by a mask whose
/// label came from the coverage-rate rule, 0 elsewhere.
class WeightMap {
 public:
  WeightMap(int height, int width) : height_(height), width_(width) {
    weights_.assign(static_cast<size_t>(height) * width, 0.0f);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  float at(int y, int x) const { return weights_[static_cast<size_t>(y) * width_ + x]; }
  float& at(int y, int x) { return weights_[static_cast<size_t>(y) * width_ + x]; }
  std::span<const float> weights() const { return weights_; }

 private:
  int height_;
  int width_;
  std::vector<float> weights_;
};

/// Which branch assigned a mask's label.
enum class FusionRule { kLcr, kEntropy };

inline const char* to_string(FusionRule r) {
  return r == FusionRule::kLcr ? "lcr" : "entropy";
}

struct MaskAssignment {
  size_t mask_index = 0;
  int label = 0;
  FusionRule rule = FusionRule::kLcr;
  double lcr_max = 0.0;  // coverage rate of the most frequent label
};

/// Fused prediction for one window: hard ensemble labels, the matching
/// one-hot/TA logits, the confidence weight map, and per-mask assignments.
struct FusedWindow {
  LabelMap ensemble_labels;
  LogitsGrid ensemble_logits;
  WeightMap weight_map;
  std::vector<MaskAssignment> per_mask_report;
};

/// Counts of each label over a mask's pixels. The counts total the mask area.
inline std::map<int, size_t> label_histogram(const InstanceMask& mask, const LabelMap& labels) {
  if (mask.on.size() != labels.size()) {
    throw InvalidInputError("label_histogram: mask and label map sizes differ");
  }
  std::map<int, size_t> hist;
  const std::span<const uint16_t> l = labels.labels();
  for (size_t i = 0; i < mask.on.size(); ++i) {
    if (mask.on[i]) ++hist[l[i]];
  }
  return hist;
}

/// Fraction of the histogram's total held by `label` (0 when absent).
inline double label_coverage_rate(const std::map<int, size_t>& hist, int label) {
  size_t total = 0;
  for (const auto& [_, n] : hist) total += n;
  if (total == 0) throw InvalidInputError("label_coverage_rate: empty histogram");
  const auto it = hist.find(label);
  return it == hist.end() ? 0.0 : static_cast<double>(it->second) / total;
}

/// Mean per-pixel Shannon entropy of the softmaxed TA logits, over the mask
/// pixels whose argmax equals `label`.
inline double entropy_score(const InstanceMask& mask, int label, const LogitsGrid& ta_logits) {
  if (mask.on.size() != ta_logits.pixel_count()) {
    throw InvalidInputError("entropy_score: mask and logits sizes differ");
  }
  std::vector<float> px(ta_logits.classes());
  std::vector<double> probs(ta_logits.classes());
  double sum = 0.0;
  size_t supporters = 0;
  for (int y = 0; y < ta_logits.height(); ++y) {
    for (int x = 0; x < ta_logits.width(); ++x) {
      if (!mask.on[static_cast<size_t>(y) * ta_logits.width() + x]) continue;
      ta_logits.pixel_logits(y, x, px);
      if (argmax_pixel(px) != label) continue;
      detail::softmax_into(std::span<const float>(px), std::span<double>(probs));
      double h = 0.0;
      for (double v : probs) {
        if (v > 0.0) h -= v * std::log(v);
      }
      sum += h;
      ++supporters;
    }
  }
  if (supporters == 0) {
    throw UndefinedScoreError("entropy_score: label " + std::to_string(label) +
                              " has no supporting pixels in the mask");
  }
  return sum / supporters;
}

/// Threshold selection: medium-sized masks demand higher coverage.
inline double select_theta(size_t area, const FusionConfig& cfg) {
  if (area == 0) throw InvalidInputError("select_theta: area must be >= 1");
  return (area >= cfg.medium_area_min && area <= cfg.medium_area_max) ? cfg.theta_medium
                                                                      : cfg.theta_default;
}

namespace detail {

/// Histogram entries ordered by count descending, label ascending on ties.
inline std::vector<std::pair<int, size_t>> ranked_labels(const std::map<int, size_t>& hist) {
  std::vector<std::pair<int, size_t>> ranked(hist.begin(), hist.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

inline MaskAssignment assign_with_labels(const InstanceMask& mask, size_t mask_index, size_t area,
                                         const LabelMap& ta_labels, const LogitsGrid& ta_logits,
                                         const FusionConfig& cfg) {
  const auto hist = label_histogram(mask, ta_labels);
  const auto ranked = ranked_labels(hist);
  const int y_max = ranked.front().first;
  const double lcr_max = static_cast<double>(ranked.front().second) / area;
  const double theta = select_theta(area, cfg);

  MaskAssignment out;
  out.mask_index = mask_index;
  out.lcr_max = lcr_max;
  if (lcr_max >= theta) {
    out.label = y_max;
    out.rule = FusionRule::kLcr;
    return out;
  }

  // Coverage too thin: pick the lowest-entropy label among the top
  // candidates actually present in the mask. Ties -> lower class index,
  // which ranked order already guarantees via strict comparison.
  int best_label = -1;
  double best_entropy = 0.0;
  const int k = std::min<int>(FusionConfig::kTopK, static_cast<int>(ranked.size()));
  for (int i = 0; i < k; ++i) {
    const int label = ranked[i].first;
    const double h = entropy_score(mask, label, ta_logits);
    if (best_label < 0 || h < best_entropy ||
        (h == best_entropy && label < best_label)) {
      best_label = label;
      best_entropy = h;
    }
  }
  out.label = best_label;
  out.rule = FusionRule::kEntropy;
  return out;
}

}  // namespace detail

/// Assigns one semantic label to an instance mask: the most frequent TA
/// argmax label when its coverage rate clears the area-dependent threshold,
/// otherwise the minimum-entropy label among the top candidates.
inline MaskAssignment assign_mask_label(const InstanceMask& mask, const LogitsGrid& ta_logits,
                                        const FusionConfig& cfg) {
  if (mask.on.size() != ta_logits.pixel_count()) {
    throw InvalidInputError("assign_mask_label: mask and logits sizes differ");
  }
  const size_t area = mask.popcount();
  if (area == 0) throw InvalidInputError("assign_mask_label: empty mask");
  const LabelMap ta_labels = argmax_map(ta_logits);
  return detail::assign_with_labels(mask, 0, area, ta_labels, ta_logits, cfg);
}

/// Cross-task fusion of one window. Every mask gets a label via
/// assign_mask_label; masks are then painted in descending-area order
/// (equal areas paint in index order), so smaller masks refine larger
/// ones. Unmasked pixels keep the TA argmax label and raw TA logits;
/// masked pixels become one-hot. Weights are 1 where the owning mask used
/// the coverage-rate rule.
inline FusedWindow fuse_window(const InstanceMaskSet& masks, const LogitsGrid& ta_logits,
                               const FusionConfig& cfg) {
  if (masks.height() != ta_logits.height() || masks.width() != ta_logits.width()) {
    throw InvalidInputError("fuse_window: mask set is " + std::to_string(masks.width()) + "x" +
                            std::to_string(masks.height()) + ", logits are " +
                            std::to_string(ta_logits.width()) + "x" +
                            std::to_string(ta_logits.height()));
  }
  cfg.validate();

  const LabelMap ta_labels = argmax_map(ta_logits);
  const size_t n = masks.count();

  std::vector<MaskAssignment> report(n);
  for (size_t m = 0; m < n; ++m) {
    report[m] =
        detail::assign_with_labels(masks.mask(m), m, masks.area(m), ta_labels, ta_logits, cfg);
  }

  // Paint ownership: descending area, index order on ties; later paints win.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (masks.area(a) != masks.area(b)) return masks.area(a) > masks.area(b);
    return a < b;
  });

  const size_t pixels = ta_logits.pixel_count();
  std::vector<int32_t> owner(pixels, -1);
  for (size_t m : order) {
    const InstanceMask& mask = masks.mask(m);
    for (size_t p = 0; p < pixels; ++p) {
      if (mask.on[p]) owner[p] = static_cast<int32_t>(m);
    }
  }

  FusedWindow out{LabelMap(ta_logits.height(), ta_logits.width()),
                  LogitsGrid(ta_logits.classes(), ta_logits.height(), ta_logits.width()),
                  WeightMap(ta_logits.height(), ta_logits.width()),
                  std::move(report)};

  const size_t plane = pixels;
  const std::span<const float> src = ta_logits.values();
  std::span<float> dst = out.ensemble_logits.values();
  for (size_t p = 0; p < pixels; ++p) {
    if (owner[p] < 0) {
      out.ensemble_labels.labels()[p] = ta_labels.labels()[p];
      for (int c = 0; c < ta_logits.classes(); ++c) dst[p + c * plane] = src[p + c * plane];
    } else {
      const MaskAssignment& a = out.per_mask_report[owner[p]];
      out.ensemble_labels.labels()[p] = static_cast<uint16_t>(a.label);
      dst[p + static_cast<size_t>(a.label) * plane] = kOneHotLogit;
      if (a.rule == FusionRule::kLcr) {
        out.weight_map.at(static_cast<int>(p / ta_logits.width()),
                          static_cast<int>(p % ta_logits.width())) = 1.0f;
      }
    }
  }
  return out;
}

}  // namespace panodar
