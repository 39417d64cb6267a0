#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panodar/error.hpp"

namespace panodar {

/// Label value that marks pixels excluded from evaluation.
inline constexpr uint16_t kIgnoreLabel = 255;

/// Logit magnitude used for one-hot grids (ensemble logits, synthetic
/// ground-truth encodings). Large enough that softmax at the hot class
/// rounds to 1.0 in double precision, so cross-entropy against a matching
/// target is exactly zero.
inline constexpr float kOneHotLogit = 50.0f;

/// Dense C×H×W grid of real-valued class scores, class-major layout:
/// value(c, y, x) lives at c·H·W + y·W + x. Storage is float32; reductions
/// over grids accumulate in double. Immutable once fully constructed —
/// operations never mutate their inputs and may run concurrently.
class LogitsGrid {
 public:
  LogitsGrid(int classes, int height, int width)
      : classes_(classes), height_(height), width_(width) {
    if (classes < 2 || height < 1 || width < 1) {
      throw InvalidInputError("LogitsGrid: need classes >= 2, height >= 1, width >= 1, got (" +
                              std::to_string(classes) + ", " + std::to_string(height) + ", " +
                              std::to_string(width) + ")");
    }
    values_.assign(static_cast<size_t>(classes) * height * width, 0.0f);
  }

  /// Takes ownership of a class-major value buffer; rejects size mismatch
  /// and non-finite entries.
  static LogitsGrid from_values(int classes, int height, int width, std::vector<float> values) {
    LogitsGrid g(classes, height, width);
    if (values.size() != g.values_.size()) {
      throw InvalidInputError("LogitsGrid: expected " + std::to_string(g.values_.size()) +
                              " values, got " + std::to_string(values.size()));
    }
    g.values_ = std::move(values);
    g.validate_finite();
    return g;
  }

  int classes() const { return classes_; }
  int height() const { return height_; }
  int width() const { return width_; }
  size_t size() const { return values_.size(); }
  size_t pixel_count() const { return static_cast<size_t>(height_) * width_; }

  float at(int c, int y, int x) const { return values_[index(c, y, x)]; }
  float& at(int c, int y, int x) { return values_[index(c, y, x)]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  /// All C scores of one pixel, gathered into `out` (size C).
  void pixel_logits(int y, int x, std::span<float> out) const {
    const size_t plane = pixel_count();
    const size_t base = static_cast<size_t>(y) * width_ + x;
    for (int c = 0; c < classes_; ++c) out[c] = values_[base + c * plane];
  }

  void validate_finite() const {
    for (size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw InvalidInputError("LogitsGrid: non-finite value at flat index " + std::to_string(i));
      }
    }
  }

  size_t index(int c, int y, int x) const {
    return (static_cast<size_t>(c) * height_ + y) * width_ + x;
  }

 private:
  int classes_;
  int height_;
  int width_;
  std::vector<float> values_;
};

/// Dense H×W grid of 0-based class ids (or kIgnoreLabel).
class LabelMap {
 public:
  LabelMap(int height, int width, uint16_t fill = 0)
      : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw InvalidInputError("LabelMap: need height >= 1 and width >= 1");
    }
    labels_.assign(static_cast<size_t>(height) * width, fill);
  }

  static LabelMap from_labels(int height, int width, std::vector<uint16_t> labels) {
    LabelMap m(height, width);
    if (labels.size() != m.labels_.size()) {
      throw InvalidInputError("LabelMap: expected " + std::to_string(m.labels_.size()) +
                              " labels, got " + std::to_string(labels.size()));
    }
    m.labels_ = std::move(labels);
    return m;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  size_t size() const { return labels_.size(); }

  uint16_t at(int y, int x) const { return labels_[static_cast<size_t>(y) * width_ + x]; }
  uint16_t& at(int y, int x) { return labels_[static_cast<size_t>(y) * width_ + x]; }

  std::span<const uint16_t> labels() const { return labels_; }
  std::span<uint16_t> labels() { return labels_; }

  bool operator==(const LabelMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && labels_ == other.labels_;
  }

  /// Checks every label < classes (optionally admitting the ignore value).
  void validate_against(int classes, bool allow_ignore = false) const {
    for (size_t i = 0; i < labels_.size(); ++i) {
      const uint16_t v = labels_[i];
      if (allow_ignore && v == kIgnoreLabel) continue;
      if (v >= classes) {
        throw InvalidInputError("LabelMap: label " + std::to_string(v) + " at flat index " +
                                std::to_string(i) + " exceeds class count " +
                                std::to_string(classes));
      }
    }
  }

 private:
  int height_;
  int width_;
  std::vector<uint16_t> labels_;
};

/// Discrete probability distribution over C classes.
struct ProbVector {
  std::vector<double> probs;

  explicit ProbVector(std::vector<double> p) : probs(std::move(p)) {
    double sum = 0.0;
    for (double v : probs) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInputError("ProbVector: probability outside [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InvalidInputError("ProbVector: probabilities sum to " + std::to_string(sum) +
                              ", expected 1 within 1e-6");
    }
  }

  size_t size() const { return probs.size(); }
};

/// Ordered class vocabulary; the channel count of every grid it governs.
class ClassCatalog {
 public:
  explicit ClassCatalog(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw InvalidInputError("ClassCatalog: need at least 2 classes");
    auto sorted = names_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidInputError("ClassCatalog: class names must be unique");
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int c) const { return names_[c]; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

namespace detail {

/// Max-subtracted softmax of one pixel's logits into `out`. Double math.
template <typename In>
inline void softmax_into(std::span<const In> logits, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (In v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp(static_cast<double>(logits[i]) - mx);
    out[i] = e;
    sum += e;
  }
  for (size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

}  // namespace detail

/// Numerically stable softmax of a single pixel's class scores.
inline ProbVector softmax_pixel(std::span<const float> logits) {
  if (logits.size() < 2) throw InvalidInputError("softmax_pixel: need at least 2 scores");
  for (float v : logits) {
    if (!std::isfinite(v)) throw InvalidInputError("softmax_pixel: non-finite input");
  }
  std::vector<double> out(logits.size());
  detail::softmax_into(logits, std::span<double>(out));
  return ProbVector(std::move(out));
}

inline ProbVector softmax_pixel(const std::vector<float>& logits) {
  return softmax_pixel(std::span<const float>(logits));
}

/// Index of the largest score; ties take the lowest class index.
inline int argmax_pixel(std::span<const float> scores) {
  int best = 0;
  for (size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<int>(c);
  }
  return best;
}

/// Per-pixel argmax of a grid, ties broken toward the lowest class index.
inline LabelMap argmax_map(const LogitsGrid& g) {
  LabelMap out(g.height(), g.width());
  const size_t plane = g.pixel_count();
  const std::span<const float> v = g.values();
  for (size_t p = 0; p < plane; ++p) {
    int best = 0;
    float best_v = v[p];
    for (int c = 1; c < g.classes(); ++c) {
      const float cv = v[p + c * plane];
      if (cv > best_v) {
        best_v = cv;
        best = c;
      }
    }
    out.labels()[p] = static_cast<uint16_t>(best);
  }
  return out;
}

/// Shannon entropy in nats, with 0·ln 0 := 0. Range [0, ln C].
inline double shannon_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.probs) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

/// Difference between the largest and second-largest probability.
inline double top2_gap(const ProbVector& p) {
  if (p.size() < 2) throw InvalidInputError("top2_gap: need at least 2 probabilities");
  double first = -1.0, second = -1.0;
  for (double v : p.probs) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

}  // namespace panodar
