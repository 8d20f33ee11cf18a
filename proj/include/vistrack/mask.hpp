#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vistrack {

/// Dense boolean pixel grid, row-major, zero-based pixel-center coordinates
/// (pixel (0,0) is top-left, x grows right, y grows down).
struct PixelGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // size width*height, row-major

  PixelGrid() = default;
  PixelGrid(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("grid dimensions must be positive");
  }

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  bool operator==(const PixelGrid&) const = default;
};

/// Run-length encoded binary instance mask.
///
/// Runs alternate background/foreground in row-major scan order; the first
/// run counts background pixels and is the only run allowed to be zero.
/// This canonical form makes equal pixel grids encode to identical runs.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  bool operator==(const BinaryMask&) const = default;
};

namespace detail {

inline void check_canonical(const BinaryMask& m) {
  if (m.width <= 0 || m.height <= 0) throw std::invalid_argument("mask dimensions must be positive");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    if (i > 0 && m.runs[i] == 0) throw std::invalid_argument("zero-length interior run");
    total += m.runs[i];
  }
  const std::uint64_t expect = static_cast<std::uint64_t>(m.width) * m.height;
  if (total != expect) throw std::invalid_argument("run lengths do not cover width*height");
}

}  // namespace detail

inline BinaryMask encode_rle(const PixelGrid& grid) {
  if (grid.width <= 0 || grid.height <= 0) throw std::invalid_argument("grid dimensions must be positive");
  BinaryMask m;
  m.width = grid.width;
  m.height = grid.height;
  bool current = false;  // scan starts counting background
  std::uint32_t run = 0;
  for (std::size_t i = 0; i < grid.data.size(); ++i) {
    const bool fg = grid.data[i] != 0;
    if (fg == current) {
      ++run;
    } else {
      m.runs.push_back(run);
      current = fg;
      run = 1;
    }
  }
  m.runs.push_back(run);
  return m;
}

inline PixelGrid decode_rle(const BinaryMask& m) {
  detail::check_canonical(m);
  PixelGrid grid(m.width, m.height);
  std::size_t pos = 0;
  bool fg = false;
  for (std::uint32_t run : m.runs) {
    if (fg) std::fill_n(grid.data.begin() + pos, run, std::uint8_t{1});
    pos += run;
    fg = !fg;
  }
  return grid;
}

/// Foreground pixel count, straight from the run lengths.
inline std::uint64_t mask_area(const BinaryMask& m) {
  std::uint64_t area = 0;
  for (std::size_t i = 1; i < m.runs.size(); i += 2) area += m.runs[i];
  return area;
}

inline bool mask_empty(const BinaryMask& m) { return mask_area(m) == 0; }

/// Largest 8-connected foreground component, returned as a mask of identical
/// dimensions. Area ties go to the component whose first pixel comes earliest
/// in row-major scan order.
inline BinaryMask max_area_component(const BinaryMask& mask) {
  const PixelGrid grid = decode_rle(mask);
  const int w = grid.width, h = grid.height;
  std::vector<std::int32_t> label(grid.data.size(), -1);
  std::int32_t best_label = -1;
  std::uint64_t best_area = 0;
  std::vector<std::size_t> stack;
  std::int32_t next_label = 0;
  for (std::size_t start = 0; start < grid.data.size(); ++start) {
    if (grid.data[start] == 0 || label[start] >= 0) continue;
    std::uint64_t area = 0;
    stack.push_back(start);
    label[start] = next_label;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++area;
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (grid.data[q] != 0 && label[q] < 0) {
            label[q] = next_label;
            stack.push_back(q);
          }
        }
      }
    }
    if (area > best_area) {  // strict: scan order already favors earlier components
      best_area = area;
      best_label = next_label;
    }
    ++next_label;
  }
  if (best_label < 0) throw std::invalid_argument("empty mask");
  PixelGrid out(w, h);
  for (std::size_t i = 0; i < label.size(); ++i) out.data[i] = label[i] == best_label ? 1 : 0;
  return encode_rle(out);
}

/// Raw image moment m_pq = sum over foreground pixels of x^p * y^q,
/// zero-based pixel coordinates. m_00 is the foreground area.
inline double moment(const BinaryMask& mask, int p, int q) {
  if (p < 0 || q < 0) throw std::invalid_argument("moment orders must be non-negative");
  const PixelGrid grid = decode_rle(mask);
  auto ipow = [](double base, int exp) {
    double r = 1.0;
    for (int k = 0; k < exp; ++k) r *= base;
    return r;
  };
  double sum = 0.0;
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x)
      if (grid.at(x, y)) sum += ipow(x, p) * ipow(y, q);
  return sum;
}

struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

/// Centroid of the maximum-area component: (m10/m00, m01/m00).
inline Centroid centroid(const BinaryMask& mask) {
  if (mask_empty(mask)) throw std::invalid_argument("empty mask");
  const BinaryMask comp = max_area_component(mask);
  const double m00 = moment(comp, 0, 0);
  return Centroid{moment(comp, 1, 0) / m00, moment(comp, 0, 1) / m00};
}

namespace detail {

// Overlap of the two masks' foreground intervals in linear scan space.
inline std::uint64_t run_intersection(const BinaryMask& a, const BinaryMask& b) {
  std::uint64_t inter = 0;
  std::size_t ia = 0, ib = 0;
  std::uint64_t pa = 0, pb = 0;  // start of current run
  bool fa = false, fb = false;
  std::uint64_t ea = ia < a.runs.size() ? a.runs[0] : 0;
  std::uint64_t eb = ib < b.runs.size() ? b.runs[0] : 0;
  while (ia < a.runs.size() && ib < b.runs.size()) {
    if (fa && fb) {
      const std::uint64_t lo = std::max(pa, pb), hi = std::min(ea, eb);
      if (hi > lo) inter += hi - lo;
    }
    if (ea <= eb) {
      pa = ea;
      ++ia;
      if (ia < a.runs.size()) ea += a.runs[ia];
      fa = !fa;
    } else {
      pb = eb;
      ++ib;
      if (ib < b.runs.size()) eb += b.runs[ib];
      fb = !fb;
    }
  }
  return inter;
}

}  // namespace detail

/// Mask IOU (intersection over union of foreground pixel sets).
/// Two empty masks score 0: empty detections never match.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mask dimension mismatch");
  const std::uint64_t inter = detail::run_intersection(a, b);
  const std::uint64_t uni = mask_area(a) + mask_area(b) - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Axis-aligned box in continuous pixel coordinates, x_min <= x_max.
struct BoundingBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool operator==(const BoundingBox&) const = default;
};

/// Tight box of the mask's foreground in pixel-extent coordinates: a pixel
/// at column c spans [c, c+1), so a full k-pixel row yields width k. This
/// keeps mask_iou == bbox_iou exact for solid rectangles and gives every
/// non-empty mask a positive-area box.
inline BoundingBox bbox_of(const BinaryMask& mask) {
  const PixelGrid grid = decode_rle(mask);
  int min_x = grid.width, min_y = grid.height, max_x = -1, max_y = -1;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (!grid.at(x, y)) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) throw std::invalid_argument("empty mask");
  return BoundingBox{static_cast<double>(min_x), static_cast<double>(min_y),
                     static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
}

inline double bbox_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;  // degenerate zero-area boxes
  return inter / uni;
}

}  // namespace vistrack
