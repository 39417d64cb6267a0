#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "panodar/boundary.hpp"
#include "panodar/error.hpp"
#include "panodar/fusion.hpp"
#include "panodar/grid.hpp"
#include "panodar/metrics.hpp"
#include "panodar/rng.hpp"

namespace panodar {

enum class NoiseMode { kInteriorFlip, kLogitBlur };
enum class PartitionMode { kVoronoi, kGrid };

inline const char* to_string(NoiseMode m) {
  return m == NoiseMode::kInteriorFlip ? "interior-flip" : "logit-blur";
}
inline const char* to_string(PartitionMode m) {
  return m == PartitionMode::kVoronoi ? "voronoi" : "grid";
}

/// Recipe for one synthetic panorama-like scene. Generation is a pure
/// function of this struct (seed included).
struct SceneSpec {
  int width = 2048;
  int height = 400;
  int classes = 19;
  int region_count = 32;
  uint64_t seed = 0;
  double noise_rate = 0.0;        // fraction of eligible pixels corrupted
  NoiseMode noise_mode = NoiseMode::kInteriorFlip;
  int mask_jitter = 0;            // morphological dilate/erode iterations
  double distortion_gradient = 0.0;  // extra corruption toward the extremes
  PartitionMode partition = PartitionMode::kVoronoi;

  void validate() const {
    if (width < 1 || height < 1) throw InvalidInputError("scene: bad dimensions");
    if (classes < 2) throw InvalidInputError("scene: need at least 2 classes");
    if (region_count < 1) throw InvalidInputError("scene: region_count must be >= 1");
    if (width < region_count || static_cast<long long>(width) * height < region_count) {
      throw InvalidInputError("scene: region_count " + std::to_string(region_count) +
                              " exceeds available pixels/columns");
    }
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
      throw InvalidInputError("scene: noise_rate must be in [0, 1)");
    }
    if (mask_jitter < 0) throw InvalidInputError("scene: mask_jitter must be >= 0");
    if (distortion_gradient < 0.0) {
      throw InvalidInputError("scene: distortion_gradient must be >= 0");
    }
  }
};

/// Ground truth plus the simulated model outputs the pipeline consumes.
struct SyntheticScene {
  LabelMap gt_labels;
  LogitsGrid ta_logits;
  InstanceMaskSet masks;
  BoundaryMap sam_boundaries;
};

namespace detail {

/// Connected components of equal labels (4-connectivity), discovered in
/// row-major order so component ids are deterministic.
inline std::vector<InstanceMask> connected_components(const LabelMap& labels) {
  const int h = labels.height(), w = labels.width();
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<int32_t> comp(n, -1);
  std::vector<InstanceMask> out;
  std::deque<std::pair<int, int>> queue;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (comp[static_cast<size_t>(y0) * w + x0] >= 0) continue;
      const uint16_t label = labels.at(y0, x0);
      const int32_t id = static_cast<int32_t>(out.size());
      InstanceMask mask;
      mask.on.assign(n, 0);
      comp[static_cast<size_t>(y0) * w + x0] = id;
      queue.push_back({y0, x0});
      while (!queue.empty()) {
        const auto [y, x] = queue.front();
        queue.pop_front();
        mask.on[static_cast<size_t>(y) * w + x] = 1;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const size_t q = static_cast<size_t>(ny[k]) * w + nx[k];
          if (comp[q] >= 0 || labels.at(ny[k], nx[k]) != label) continue;
          comp[q] = id;
          queue.push_back({ny[k], nx[k]});
        }
      }
      out.push_back(std::move(mask));
    }
  }
  return out;
}

inline InstanceMask morph_step(const InstanceMask& mask, int h, int w, bool dilate) {
  InstanceMask out;
  out.on.assign(mask.on.size(), 0);
  auto at = [&](int y, int x) -> bool {
    return y >= 0 && y < h && x >= 0 && x < w && mask.on[static_cast<size_t>(y) * w + x] != 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v;
      if (dilate) {
        v = at(y, x) || at(y - 1, x) || at(y + 1, x) || at(y, x - 1) || at(y, x + 1);
      } else {
        // Erosion treats out-of-bounds as inside, so image borders survive.
        auto in = [&](int yy, int xx) {
          return yy < 0 || yy >= h || xx < 0 || xx >= w || at(yy, xx);
        };
        v = at(y, x) && in(y - 1, x) && in(y + 1, x) && in(y, x - 1) && in(y, x + 1);
      }
      out.on[static_cast<size_t>(y) * w + x] = v ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

/// Deterministic scene generation. Random stream consumption order:
/// partition sites (x then y per region), then — when noise_rate > 0 — a
/// row-major pixel scan drawing once per eligible pixel plus one draw per
/// corrupted pixel, then one direction bit per mask when jitter > 0.
inline SyntheticScene generate(const SceneSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const int h = spec.height, w = spec.width, classes = spec.classes;

  // Ground-truth partition; region i carries class i mod C.
  LabelMap gt(h, w);
  if (spec.partition == PartitionMode::kVoronoi) {
    std::vector<int> sx(spec.region_count), sy(spec.region_count);
    for (int i = 0; i < spec.region_count; ++i) {
      sx[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(w)));
      sy[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(h)));
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        long long best = -1;
        int best_i = 0;
        for (int i = 0; i < spec.region_count; ++i) {
          const long long dx = x - sx[i], dy = y - sy[i];
          const long long d = dx * dx + dy * dy;
          if (best < 0 || d < best) {
            best = d;
            best_i = i;
          }
        }
        gt.at(y, x) = static_cast<uint16_t>(best_i % classes);
      }
    }
  } else {
    // Vertical bands with boundaries at floor(k*w/regions).
    for (int x = 0; x < w; ++x) {
      const int band = std::min(spec.region_count - 1,
                                static_cast<int>(static_cast<long long>(x) * spec.region_count / w));
      for (int y = 0; y < h; ++y) gt.at(y, x) = static_cast<uint16_t>(band % classes);
    }
  }

  // One-hot TA logits, then per-pixel corruption.
  LogitsGrid ta(classes, h, w);
  const size_t plane = ta.pixel_count();
  for (size_t p = 0; p < plane; ++p) {
    ta.values()[p + static_cast<size_t>(gt.labels()[p]) * plane] = kOneHotLogit;
  }

  const BoundaryMap gt_boundary = boundaries_from_labels(gt);
  const double denom = w > 1 ? static_cast<double>(w - 1) : 1.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool interior = !gt_boundary.at(y, x);
      const bool eligible = spec.noise_mode == NoiseMode::kInteriorFlip ? interior : true;
      if (!eligible || spec.noise_rate <= 0.0) continue;
      const double edge = std::abs(2.0 * x - (w - 1)) / denom;
      const double p_corrupt =
          std::min(1.0, spec.noise_rate * (1.0 + spec.distortion_gradient * edge));
      if (rng.next_double() >= p_corrupt) continue;
      const size_t p = static_cast<size_t>(y) * w + x;
      const int true_class = gt.labels()[p];
      if (spec.noise_mode == NoiseMode::kInteriorFlip) {
        // Argmax moves to a random other class; the true class keeps a
        // slightly weaker logit so flipped pixels are visibly less certain.
        const int wrong =
            static_cast<int>((true_class + 1 + rng.next_below(classes - 1)) % classes);
        ta.values()[p + static_cast<size_t>(true_class) * plane] = kOneHotLogit * 0.9f;
        ta.values()[p + static_cast<size_t>(wrong) * plane] = kOneHotLogit;
      } else {
        const double t = 0.8 + 0.2 * rng.next_double();
        const float scale = static_cast<float>(1.0 - t);
        for (int c = 0; c < classes; ++c) ta.values()[p + static_cast<size_t>(c) * plane] *= scale;
      }
    }
  }

  // Masks: connected components of the ground truth, optionally jittered.
  std::vector<InstanceMask> components = detail::connected_components(gt);
  InstanceMaskSet masks(h, w);
  for (InstanceMask& mask : components) {
    if (spec.mask_jitter > 0) {
      const bool dilate = (rng.next_u64() & 1) != 0;
      for (int it = 0; it < spec.mask_jitter; ++it) {
        InstanceMask next = detail::morph_step(mask, h, w, dilate);
        if (next.popcount() == 0) break;  // keep the last non-empty stage
        mask = std::move(next);
      }
    }
    masks.add(std::move(mask));
  }

  BoundaryMap sam = boundaries_from_masks(masks);
  return SyntheticScene{std::move(gt), std::move(ta), std::move(masks), std::move(sam)};
}

/// Runs the plain TA argmax and the fused ensemble against the ground
/// truth. Returns (miou_ta, miou_ensemble).
inline std::pair<double, double> measure_improvement(const SyntheticScene& scene,
                                                     const FusionConfig& cfg) {
  const LabelMap ta_pred = argmax_map(scene.ta_logits);
  const FusedWindow fused = fuse_window(scene.masks, scene.ta_logits, cfg);

  const int classes = scene.ta_logits.classes();
  ConfusionMatrix cm_ta(classes), cm_ens(classes);
  accumulate(cm_ta, scene.gt_labels, ta_pred);
  accumulate(cm_ens, scene.gt_labels, fused.ensemble_labels);
  return {mean_iou(cm_ta), mean_iou(cm_ens)};
}

}  // namespace panodar
