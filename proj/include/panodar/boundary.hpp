#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "panodar/error.hpp"
#include "panodar/fusion.hpp"
#include "panodar/grid.hpp"

namespace panodar {

/// Binary H×W map of boundary pixels.
class BoundaryMap {
 public:
  BoundaryMap(int height, int width) : height_(height), width_(width) {
    if (height < 1 || width < 1) throw InvalidInputError("BoundaryMap: bad dimensions");
    on_.assign(static_cast<size_t>(height) * width, 0);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  size_t size() const { return on_.size(); }

  bool at(int y, int x) const { return on_[static_cast<size_t>(y) * width_ + x] != 0; }
  void set(int y, int x, bool v) { on_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0; }

  std::span<const uint8_t> data() const { return on_; }
  std::span<uint8_t> data() { return on_; }

  size_t popcount() const {
    size_t n = 0;
    for (uint8_t v : on_) n += v;
    return n;
  }

  bool operator==(const BoundaryMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && on_ == other.on_;
  }

 private:
  int height_;
  int width_;
  std::vector<uint8_t> on_;
};

/// How strongly SAM boundary pixels may displace TA boundary pixels during
/// refinement: a relocation happens when the smaller of the two top-2
/// softmax gaps at the SAM pixel falls below alpha.
struct RefineConfig {
  double alpha = 0.3;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigValueError("alpha must be in (0, 1)");
  }
};

/// A pixel is a boundary pixel iff any in-bounds 4-neighbor carries a
/// different label.
inline BoundaryMap boundaries_from_labels(const LabelMap& labels) {
  const int h = labels.height(), w = labels.width();
  BoundaryMap out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const uint16_t v = labels.at(y, x);
      const bool boundary = (y > 0 && labels.at(y - 1, x) != v) ||
                            (y + 1 < h && labels.at(y + 1, x) != v) ||
                            (x > 0 && labels.at(y, x - 1) != v) ||
                            (x + 1 < w && labels.at(y, x + 1) != v);
      out.set(y, x, boundary);
    }
  }
  return out;
}

/// Union over masks of each mask's inner contour: pixels inside the mask
/// with an in-bounds 4-neighbor outside it.
inline BoundaryMap boundaries_from_masks(const InstanceMaskSet& masks) {
  const int h = masks.height(), w = masks.width();
  BoundaryMap out(h, w);
  for (size_t m = 0; m < masks.count(); ++m) {
    const auto& on = masks.mask(m).on;
    auto inside = [&](int y, int x) { return on[static_cast<size_t>(y) * w + x] != 0; };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!inside(y, x)) continue;
        const bool contour = (y > 0 && !inside(y - 1, x)) || (y + 1 < h && !inside(y + 1, x)) ||
                             (x > 0 && !inside(y, x - 1)) || (x + 1 < w && !inside(y, x + 1));
        if (contour) out.set(y, x, true);
      }
    }
  }
  return out;
}

namespace detail {

inline void require_same_shape(const BoundaryMap& a, const BoundaryMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInputError(std::string(what) + ": boundary map dimensions differ");
  }
}

/// Nearest set pixel in column x of `map`, searching rows outward from y;
/// equidistant up/down resolves upward. Returns -1 when the column is empty.
inline int nearest_in_column(const BoundaryMap& map, int y, int x) {
  const int h = map.height();
  for (int d = 0; d < h; ++d) {
    if (y - d >= 0 && map.at(y - d, x)) return y - d;
    if (y + d < h && map.at(y + d, x)) return y + d;
  }
  return -1;
}

inline double top2_gap_at(const LogitsGrid& g, int y, int x, std::vector<float>& px,
                          std::vector<double>& probs) {
  g.pixel_logits(y, x, px);
  softmax_into(std::span<const float>(px), std::span<double>(probs));
  double first = -1.0, second = -1.0;
  for (double v : probs) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

}  // namespace detail

/// Reconciles the TA boundary maps of two adjacent windows with the SAM
/// boundary map on their shared overlap. For each boundary pixel p of
/// b_ta_i:
///   a) boundary in b_ta_j and b_sam at the same position -> keep p;
///   b) otherwise, with q the nearest b_sam boundary pixel in p's column:
///      if the top-2 softmax gap of either window's logits at q is below
///      alpha, q replaces p;
///   c) otherwise (or when the column has no SAM pixel) keep p.
inline BoundaryMap refine_boundary(const BoundaryMap& b_ta_i, const BoundaryMap& b_ta_j,
                                   const BoundaryMap& b_sam, const LogitsGrid& logits_i,
                                   const LogitsGrid& logits_j, const RefineConfig& cfg) {
  detail::require_same_shape(b_ta_i, b_ta_j, "refine_boundary");
  detail::require_same_shape(b_ta_i, b_sam, "refine_boundary");
  if (logits_i.height() != b_ta_i.height() || logits_i.width() != b_ta_i.width() ||
      logits_j.height() != b_ta_i.height() || logits_j.width() != b_ta_i.width()) {
    throw InvalidInputError("refine_boundary: logits dimensions differ from boundary maps");
  }
  cfg.validate();

  BoundaryMap out(b_ta_i.height(), b_ta_i.width());
  std::vector<float> px(logits_i.classes());
  std::vector<double> probs(logits_i.classes());
  std::vector<float> px_j(logits_j.classes());
  std::vector<double> probs_j(logits_j.classes());

  for (int y = 0; y < b_ta_i.height(); ++y) {
    for (int x = 0; x < b_ta_i.width(); ++x) {
      if (!b_ta_i.at(y, x)) continue;
      if (b_ta_j.at(y, x) && b_sam.at(y, x)) {
        out.set(y, x, true);  // case a
        continue;
      }
      const int qy = detail::nearest_in_column(b_sam, y, x);
      if (qy >= 0) {
        const double d_i = detail::top2_gap_at(logits_i, qy, x, px, probs);
        const double d_j = detail::top2_gap_at(logits_j, qy, x, px_j, probs_j);
        if (std::min(d_i, d_j) < cfg.alpha) {
          out.set(qy, x, true);  // case b: SAM pixel replaces p
          continue;
        }
      }
      out.set(y, x, true);  // case c
    }
  }
  return out;
}

namespace detail {

inline size_t hamming(const BoundaryMap& a, const BoundaryMap& b) {
  size_t n = 0;
  const auto da = a.data(), db = b.data();
  for (size_t i = 0; i < da.size(); ++i) n += (da[i] != db[i]);
  return n;
}

}  // namespace detail

/// Mean disagreement of both TA maps against the refined map, normalized
/// by the refined map's boundary pixel count.
inline double boundary_loss_ta(const BoundaryMap& b_ref, const BoundaryMap& b_ta_i,
                               const BoundaryMap& b_ta_j) {
  detail::require_same_shape(b_ref, b_ta_i, "boundary_loss_ta");
  detail::require_same_shape(b_ref, b_ta_j, "boundary_loss_ta");
  const size_t c_o = b_ref.popcount();
  if (c_o == 0) throw DegenerateInputError("boundary_loss_ta: reference map has no boundary pixels");
  return static_cast<double>(detail::hamming(b_ref, b_ta_i) + detail::hamming(b_ref, b_ta_j)) /
         static_cast<double>(c_o);
}

/// Single-map variant supervising a student boundary map.
inline double boundary_loss_student(const BoundaryMap& b_ref, const BoundaryMap& b_s) {
  detail::require_same_shape(b_ref, b_s, "boundary_loss_student");
  const size_t c_o = b_ref.popcount();
  if (c_o == 0) {
    throw DegenerateInputError("boundary_loss_student: reference map has no boundary pixels");
  }
  return static_cast<double>(detail::hamming(b_ref, b_s)) / static_cast<double>(c_o);
}

}  // namespace panodar
