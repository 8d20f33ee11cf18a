// Test-side reference implementations, deliberately written as direct
// transcriptions (pixel loops, exhaustive enumeration, closed-form CDFs)
// and kept independent of the library code paths they check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "vistrack/mask.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Pixel-loop geometry

inline double moment_pixel_loop(const vistrack::PixelGrid& g, int p, int q) {
  double sum = 0.0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      if (g.at(x, y)) sum += std::pow(x, p) * std::pow(y, q);
  return sum;
}

inline double iou_pixel_sets(const vistrack::PixelGrid& a, const vistrack::PixelGrid& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool fa = a.data[i] != 0, fb = b.data[i] != 0;
    if (fa && fb) ++inter;
    if (fa || fb) ++uni;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

// BFS flood fill, 8-connectivity; returns the label grid and component areas
// in discovery (scan) order.
inline std::pair<std::vector<int>, std::vector<long>> flood_fill(const vistrack::PixelGrid& g) {
  std::vector<int> label(g.data.size(), -1);
  std::vector<long> areas;
  for (int sy = 0; sy < g.height; ++sy) {
    for (int sx = 0; sx < g.width; ++sx) {
      const std::size_t start = static_cast<std::size_t>(sy) * g.width + sx;
      if (g.data[start] == 0 || label[start] >= 0) continue;
      const int id = static_cast<int>(areas.size());
      long area = 0;
      std::deque<std::pair<int, int>> queue{{sx, sy}};
      label[start] = id;
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        ++area;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= g.width || ny >= g.height) continue;
            const std::size_t q = static_cast<std::size_t>(ny) * g.width + nx;
            if (g.data[q] != 0 && label[q] < 0) {
              label[q] = id;
              queue.emplace_back(nx, ny);
            }
          }
      }
      areas.push_back(area);
    }
  }
  return {label, areas};
}

inline vistrack::PixelGrid largest_component_grid(const vistrack::PixelGrid& g) {
  const auto [label, areas] = flood_fill(g);
  int best = 0;
  for (std::size_t i = 1; i < areas.size(); ++i)
    if (areas[i] > areas[best]) best = static_cast<int>(i);
  vistrack::PixelGrid out(g.width, g.height);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    out.data[i] = label[i] == best ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive assignment enumeration with the (cardinality, cost, lex) order.

struct BruteAssignment {
  std::vector<std::pair<int, int>> pairs;
  double cost = 0.0;
  int cardinality = 0;
};

inline void brute_recurse(const Eigen::MatrixXd& c, int row, std::vector<int>& cols_used,
                          std::vector<std::pair<int, int>>& current, double cost,
                          std::optional<BruteAssignment>& best) {
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  if (row == n) {
    const int k = static_cast<int>(current.size());
    if (!best || k > best->cardinality || (k == best->cardinality && cost < best->cost) ||
        (k == best->cardinality && cost == best->cost && current < best->pairs))
      best = BruteAssignment{current, cost, k};
    return;
  }
  for (int j = 0; j < m; ++j) {
    if (cols_used[j] || !std::isfinite(c(row, j))) continue;
    cols_used[j] = 1;
    current.emplace_back(row, j);
    brute_recurse(c, row + 1, cols_used, current, cost + c(row, j), best);
    current.pop_back();
    cols_used[j] = 0;
  }
  brute_recurse(c, row + 1, cols_used, current, cost, best);  // leave row unmatched
}

inline BruteAssignment brute_force_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> cols_used(c.cols(), 0);
  std::vector<std::pair<int, int>> current;
  std::optional<BruteAssignment> best;
  brute_recurse(c, 0, cols_used, current, 0.0, best);
  BruteAssignment out = *best;
  out.cost = 0.0;  // re-sum in row order, matching the solver's convention
  for (const auto& [i, j] : out.pairs) out.cost += c(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Chi-square (4 dof) quantile via the closed-form CDF and bisection.

inline double chi2_4dof_cdf(double x) { return 1.0 - std::exp(-x / 2.0) * (1.0 + x / 2.0); }

inline double chi2_4dof_quantile(double p) {
  double lo = 0.0, hi = 100.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_4dof_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Scalar constant-velocity Kalman recursion (position/velocity block), a
// direct transcription of the textbook equations.

struct Scalar2State {
  double pos = 0.0, vel = 0.0;
  double p00 = 0.0, p01 = 0.0, p11 = 0.0;
};

inline Scalar2State scalar_predict(Scalar2State s, double q_pos, double q_vel) {
  s.pos += s.vel;
  const double p00 = s.p00 + 2 * s.p01 + s.p11 + q_pos * q_pos;
  const double p01 = s.p01 + s.p11;
  s.p00 = p00;
  s.p01 = p01;
  s.p11 = s.p11 + q_vel * q_vel;
  return s;
}

inline Scalar2State scalar_update(Scalar2State s, double z, double r_std) {
  const double sres = s.p00 + r_std * r_std;
  const double k0 = s.p00 / sres, k1 = s.p01 / sres;
  const double innov = z - s.pos;
  s.pos += k0 * innov;
  s.vel += k1 * innov;
  const double p00 = (1 - k0) * s.p00;
  const double p01 = (1 - k0) * s.p01;
  const double p11 = s.p11 - k1 * s.p01;
  s.p00 = p00;
  s.p01 = p01;
  s.p11 = p11;
  return s;
}

}  // namespace oracle
