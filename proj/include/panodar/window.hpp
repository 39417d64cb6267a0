#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "panodar/error.hpp"
#include "panodar/grid.hpp"

namespace panodar {

/// One full-height vertical slice of the canvas.
struct WindowRegion {
  int index = 0;
  int x_start = 0;
  int width = 0;
  int height = 0;
};

/// Columns shared by two horizontally adjacent windows, in canvas frame.
struct OverlapRegion {
  int left_window = 0;
  int right_window = 0;
  int x_start = 0;
  int width = 0;
};

/// How stitch resolves columns covered by more than one window.
enum class StitchMode {
  kConcat,   // the later (right) window owns overlap columns
  kAverage,  // overlap columns take the mean of covering windows
};

/// Horizontal sliding-window layout over an equirectangular canvas.
/// Windows always span the full canvas height; together they cover every
/// column. Overlap records exist iff stride < window_width.
struct WindowPlan {
  int canvas_width = 0;
  int canvas_height = 0;
  int window_width = 0;
  int stride = 0;
  std::vector<WindowRegion> windows;
  std::vector<OverlapRegion> overlaps;
};

/// Lays out windows at 0, stride, 2·stride, …. If the last regular start
/// leaves uncovered columns, one extra window is appended at
/// canvas_w − win_w (clamped), which may shrink the final overlap.
inline WindowPlan plan_overlapping(int canvas_w, int canvas_h, int win_w, int stride) {
  if (canvas_h < 1) throw InvalidGeometryError("plan: canvas height must be >= 1");
  if (win_w < 1 || win_w > canvas_w) {
    throw InvalidGeometryError("plan: window width " + std::to_string(win_w) +
                               " must be in [1, canvas width " + std::to_string(canvas_w) + "]");
  }
  if (stride < 1 || stride > win_w) {
    throw InvalidGeometryError("plan: stride " + std::to_string(stride) +
                               " must be in [1, window width " + std::to_string(win_w) + "]");
  }

  WindowPlan plan;
  plan.canvas_width = canvas_w;
  plan.canvas_height = canvas_h;
  plan.window_width = win_w;
  plan.stride = stride;

  for (int start = 0; start + win_w <= canvas_w; start += stride) {
    plan.windows.push_back({static_cast<int>(plan.windows.size()), start, win_w, canvas_h});
  }
  const int last_end = plan.windows.back().x_start + win_w;
  if (last_end < canvas_w) {
    plan.windows.push_back({static_cast<int>(plan.windows.size()), canvas_w - win_w, win_w,
                            canvas_h});
  }

  if (stride < win_w) {
    for (size_t i = 0; i + 1 < plan.windows.size(); ++i) {
      const WindowRegion& a = plan.windows[i];
      const WindowRegion& b = plan.windows[i + 1];
      const int ov_width = a.x_start + a.width - b.x_start;
      plan.overlaps.push_back({a.index, b.index, b.x_start, ov_width});
    }
  }
  return plan;
}

/// Side-by-side windows (stride = window width). Clamping may duplicate a
/// few columns before the final window; stitch's concat rule resolves them.
inline WindowPlan plan_nonoverlapping(int canvas_w, int canvas_h, int win_w) {
  return plan_overlapping(canvas_w, canvas_h, win_w, win_w);
}

/// Copies one window's columns out of a canvas grid.
inline LogitsGrid extract(const LogitsGrid& g, const WindowRegion& w) {
  if (w.x_start < 0 || w.width < 1 || w.x_start + w.width > g.width() || w.height != g.height()) {
    throw InvalidGeometryError("extract: window [" + std::to_string(w.x_start) + ", " +
                               std::to_string(w.x_start + w.width) + ") x height " +
                               std::to_string(w.height) + " does not fit canvas " +
                               std::to_string(g.width()) + "x" + std::to_string(g.height()));
  }
  LogitsGrid out(g.classes(), w.height, w.width);
  for (int c = 0; c < g.classes(); ++c) {
    for (int y = 0; y < w.height; ++y) {
      const float* src = g.values().data() + g.index(c, y, w.x_start);
      float* dst = out.values().data() + out.index(c, y, 0);
      std::copy(src, src + w.width, dst);
    }
  }
  return out;
}

inline LabelMap extract(const LabelMap& m, const WindowRegion& w) {
  if (w.x_start < 0 || w.width < 1 || w.x_start + w.width > m.width() || w.height != m.height()) {
    throw InvalidGeometryError("extract: window does not fit label map");
  }
  LabelMap out(w.height, w.width);
  for (int y = 0; y < w.height; ++y) {
    for (int x = 0; x < w.width; ++x) out.at(y, x) = m.at(y, w.x_start + x);
  }
  return out;
}

/// Rebuilds a canvas grid from per-window grids. Columns covered by one
/// window are copied bit-exactly in both modes.
inline LogitsGrid stitch(const WindowPlan& plan, const std::vector<LogitsGrid>& parts,
                         StitchMode mode) {
  if (parts.size() != plan.windows.size()) {
    throw InvalidInputError("stitch: expected " + std::to_string(plan.windows.size()) +
                            " parts, got " + std::to_string(parts.size()));
  }
  const int classes = parts.empty() ? 0 : parts.front().classes();
  for (size_t i = 0; i < parts.size(); ++i) {
    const WindowRegion& w = plan.windows[i];
    if (parts[i].classes() != classes || parts[i].height() != w.height ||
        parts[i].width() != w.width) {
      throw InvalidInputError("stitch: part " + std::to_string(i) + " is " +
                              std::to_string(parts[i].classes()) + "x" +
                              std::to_string(parts[i].height()) + "x" +
                              std::to_string(parts[i].width()) + ", window wants " +
                              std::to_string(classes) + "x" + std::to_string(w.height) + "x" +
                              std::to_string(w.width));
    }
  }

  LogitsGrid out(classes, plan.canvas_height, plan.canvas_width);
  if (mode == StitchMode::kConcat) {
    // Paint windows in order; later windows own shared columns.
    for (size_t i = 0; i < parts.size(); ++i) {
      const WindowRegion& w = plan.windows[i];
      for (int c = 0; c < classes; ++c) {
        for (int y = 0; y < w.height; ++y) {
          const float* src = parts[i].values().data() + parts[i].index(c, y, 0);
          float* dst = out.values().data() + out.index(c, y, w.x_start);
          std::copy(src, src + w.width, dst);
        }
      }
    }
    return out;
  }

  // Average mode: per-column accumulation in double, fixed window order.
  std::vector<int> cover(plan.canvas_width, 0);
  for (const WindowRegion& w : plan.windows) {
    for (int x = w.x_start; x < w.x_start + w.width; ++x) ++cover[x];
  }
  std::vector<double> acc(out.size(), 0.0);
  for (size_t i = 0; i < parts.size(); ++i) {
    const WindowRegion& w = plan.windows[i];
    for (int c = 0; c < classes; ++c) {
      for (int y = 0; y < w.height; ++y) {
        const float* src = parts[i].values().data() + parts[i].index(c, y, 0);
        double* dst = acc.data() + out.index(c, y, w.x_start);
        for (int x = 0; x < w.width; ++x) dst[x] += static_cast<double>(src[x]);
      }
    }
  }
  for (int c = 0; c < classes; ++c) {
    for (int y = 0; y < plan.canvas_height; ++y) {
      for (int x = 0; x < plan.canvas_width; ++x) {
        out.at(c, y, x) = static_cast<float>(acc[out.index(c, y, x)] / cover[x]);
      }
    }
  }
  return out;
}

/// Concat-stitches per-window label maps (later window wins shared columns).
inline LabelMap stitch_labels(const WindowPlan& plan, const std::vector<LabelMap>& parts) {
  if (parts.size() != plan.windows.size()) {
    throw InvalidInputError("stitch_labels: part count does not match plan");
  }
  LabelMap out(plan.canvas_height, plan.canvas_width);
  for (size_t i = 0; i < parts.size(); ++i) {
    const WindowRegion& w = plan.windows[i];
    if (parts[i].height() != w.height || parts[i].width() != w.width) {
      throw InvalidInputError("stitch_labels: part " + std::to_string(i) + " dimension mismatch");
    }
    for (int y = 0; y < w.height; ++y) {
      for (int x = 0; x < w.width; ++x) out.at(y, w.x_start + x) = parts[i].at(y, x);
    }
  }
  return out;
}

}  // namespace panodar
