#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vistrack/embedding.hpp"
#include "vistrack/mask.hpp"
#include "vistrack/metrics.hpp"
#include "vistrack/random.hpp"
#include "vistrack/tracker.hpp"

namespace vistrack {

enum class ShapeKind { Rectangle, Ellipse, LShape };

/// Shape footprint. For LShape, `width` is the bounding square size and
/// `height` the arm thickness (axis-aligned only). Optional deformation
/// oscillates the axes against each other; optional rotation spins the shape.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Rectangle;
  double width = 10.0;
  double height = 10.0;
  double deform_amp = 0.0;
  double deform_period = 0.0;
  double deform_phase = 0.0;
  double rotate_rate = 0.0;  // radians per frame
  double rotate_phase = 0.0;
};

/// Linear path with optional sinusoidal jitter added to y.
struct MotionSpec {
  double x0 = 0.0, y0 = 0.0;
  double vx = 0.0, vy = 0.0;
  double jitter_amp = 0.0;
  double jitter_period = 0.0;
  double jitter_phase = 0.0;
};

struct IdentitySpec {
  ShapeSpec shape;
  MotionSpec motion;
};

/// Two identities exchange paths over [frame_start, frame_end], meeting near
/// the middle; afterwards each continues on the other's path.
struct CrossingEvent {
  int a = 0, b = 1;
  int frame_start = 0, frame_end = 0;
};

/// Scheduled occlusion: the identity goes undetected over the window
/// (inclusive) while staying in the ground truth.
struct DropEvent {
  int identity = 0;
  int frame_start = 0, frame_end = 0;
};

enum class EmbeddingScheme { Orthogonal, RandomUnit };

struct ScenarioConfig {
  int n_frames = 0;
  int width = 0, height = 0;
  std::vector<IdentitySpec> identities;
  EmbeddingScheme scheme = EmbeddingScheme::Orthogonal;
  int embedding_length = 32;
  double embedding_noise = 0.0;
  double drop_probability = 0.0;
  std::vector<CrossingEvent> crossings;
  std::vector<DropEvent> scripted_drops;
  std::uint64_t seed = 0;
  bool emit_feature_maps = false;
  double map_stride = 4.0;
  double map_fill_radius = 8.0;
};

struct Scenario {
  LabeledSequence gt;
  std::vector<std::vector<Detection>> detections;  // per frame
  std::vector<FeatureMapStack> stacks;             // per frame when maps are emitted
  bool has_stacks = false;
};

namespace detail {

struct Pose {
  double cx = 0.0, cy = 0.0;
  double w = 0.0, h = 0.0;
  double angle = 0.0;
};

inline Pose shape_pose(const ShapeSpec& s, double cx, double cy, int t) {
  Pose p{cx, cy, s.width, s.height, 0.0};
  if (s.deform_period > 0.0) {
    const double osc = s.deform_amp * std::sin(2.0 * M_PI * t / s.deform_period + s.deform_phase);
    p.w = s.width * (1.0 + osc);
    p.h = s.height * (1.0 - osc);
  }
  if (s.rotate_rate != 0.0 || s.rotate_phase != 0.0) p.angle = s.rotate_rate * t + s.rotate_phase;
  return p;
}

inline void check_bounds(const ShapeSpec& s, const Pose& p, int width, int height) {
  double ex, ey;  // half extents
  if (s.kind == ShapeKind::LShape || p.angle == 0.0) {
    ex = (s.kind == ShapeKind::LShape ? p.w : p.w) / 2.0;
    ey = (s.kind == ShapeKind::LShape ? p.w : p.h) / 2.0;
  } else {
    const double r = s.kind == ShapeKind::Rectangle ? 0.5 * std::hypot(p.w, p.h)
                                                    : 0.5 * std::max(p.w, p.h);
    ex = ey = r;
  }
  if (p.cx - ex < 0.0 || p.cx + ex > width - 1 || p.cy - ey < 0.0 || p.cy + ey > height - 1)
    throw std::invalid_argument("shape exceeds image bounds");
}

inline bool shape_contains(const ShapeSpec& s, const Pose& p, double x, double y) {
  const double dx = x - p.cx, dy = y - p.cy;
  if (s.kind == ShapeKind::LShape) {
    const double b = p.w, arm = p.h;
    const double lx = dx + b / 2.0, ly = dy + b / 2.0;
    if (lx < 0.0 || lx >= b || ly < 0.0 || ly >= b) return false;
    return lx < arm || ly >= b - arm;
  }
  const double c = std::cos(p.angle), sn = std::sin(p.angle);
  const double rx = dx * c + dy * sn;
  const double ry = -dx * sn + dy * c;
  if (s.kind == ShapeKind::Rectangle) return std::abs(rx) < p.w / 2.0 && std::abs(ry) < p.h / 2.0;
  const double ax = rx / (p.w / 2.0), ay = ry / (p.h / 2.0);
  return ax * ax + ay * ay <= 1.0;
}

inline BinaryMask rasterize(const ShapeSpec& s, const Pose& p, int width, int height) {
  check_bounds(s, p, width, height);
  PixelGrid grid(width, height);
  const double reach = s.kind == ShapeKind::LShape ? p.w : std::max(p.w, p.h);
  const int x_lo = std::max(0, static_cast<int>(std::floor(p.cx - reach)));
  const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(p.cx + reach)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(p.cy - reach)));
  const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(p.cy + reach)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x)
      if (shape_contains(s, p, x, y)) grid.set(x, y, true);
  return encode_rle(grid);
}

inline std::pair<double, double> base_position(const MotionSpec& m, int t) {
  double x = m.x0 + m.vx * t;
  double y = m.y0 + m.vy * t;
  if (m.jitter_period > 0.0)
    y += m.jitter_amp * std::sin(2.0 * M_PI * t / m.jitter_period + m.jitter_phase);
  return {x, y};
}

// Owner map: per feature-map cell, the identity whose mask lies nearest to
// the cell center (within the fill radius).
inline std::vector<int> cell_owners(const std::vector<BinaryMask>& masks, int map_w, int map_h,
                                    double stride, double radius) {
  std::vector<int> owner(static_cast<std::size_t>(map_w) * map_h, -1);
  std::vector<double> best(owner.size(), radius);
  const int cell_reach = static_cast<int>(std::ceil(radius / stride)) + 1;
  for (std::size_t id = 0; id < masks.size(); ++id) {
    const PixelGrid grid = decode_rle(masks[id]);
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        if (!grid.at(x, y)) continue;
        const int cu = static_cast<int>(x / stride), cv = static_cast<int>(y / stride);
        for (int dv = -cell_reach; dv <= cell_reach; ++dv) {
          for (int du = -cell_reach; du <= cell_reach; ++du) {
            const int u = cu + du, v = cv + dv;
            if (u < 0 || v < 0 || u >= map_w || v >= map_h) continue;
            const double ccx = (u + 0.5) * stride, ccy = (v + 0.5) * stride;
            const double d = std::hypot(ccx - x, ccy - y);
            const std::size_t idx = static_cast<std::size_t>(v) * map_w + u;
            if (d < best[idx]) {
              best[idx] = d;
              owner[idx] = static_cast<int>(id);
            }
          }
        }
      }
    }
  }
  return owner;
}

inline FeatureMapStack build_stack(const std::vector<BinaryMask>& masks,
                                   const std::vector<Eigen::VectorXd>& vectors, int width,
                                   int height, double stride, double radius) {
  FeatureMap map;
  map.stride = stride;
  map.width = static_cast<int>(std::ceil(width / stride));
  map.height = static_cast<int>(std::ceil(height / stride));
  map.channels = vectors.empty() ? 0 : static_cast<int>(vectors[0].size());
  map.values.assign(
      static_cast<std::size_t>(map.channels) * map.height * map.width, 0.0);
  const auto owner = cell_owners(masks, map.width, map.height, stride, radius);
  for (int v = 0; v < map.height; ++v)
    for (int u = 0; u < map.width; ++u) {
      const int id = owner[static_cast<std::size_t>(v) * map.width + u];
      if (id < 0) continue;
      for (int c = 0; c < map.channels; ++c) map.at(c, v, u) = vectors[id](c);
    }
  FeatureMapStack stack;
  stack.maps.push_back(std::move(map));
  return stack;
}

}  // namespace detail

inline std::vector<Eigen::VectorXd> make_identity_bases(EmbeddingScheme scheme, int n, int e,
                                                        RandomStream& rng) {
  if (n > e && scheme == EmbeddingScheme::Orthogonal)
    throw std::invalid_argument("orthogonal scheme needs embedding_length >= identities");
  std::vector<Eigen::VectorXd> bases;
  bases.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(e);
    if (scheme == EmbeddingScheme::Orthogonal) {
      b(i) = 1.0;
    } else {
      for (int k = 0; k < e; ++k) b(k) = rng.next_gaussian();
      b.normalize();
    }
    bases.push_back(std::move(b));
  }
  return bases;
}

/// Deterministic scenario synthesis. Stream discipline (given cfg.seed): any
/// random bases first (identity order), then per frame, per identity in
/// order: embedding_length noise gaussians followed by one drop uniform.
inline Scenario generate(const ScenarioConfig& cfg) {
  const int n = static_cast<int>(cfg.identities.size());
  if (cfg.n_frames <= 0 || cfg.width <= 0 || cfg.height <= 0 || n == 0)
    throw std::invalid_argument("scenario dimensions must be positive");
  for (const auto& ev : cfg.crossings) {
    if (ev.a < 0 || ev.b < 0 || ev.a >= n || ev.b >= n || ev.a == ev.b ||
        ev.frame_end <= ev.frame_start || ev.frame_start < 0 || ev.frame_end >= cfg.n_frames)
      throw std::invalid_argument("invalid crossing event");
  }

  RandomStream rng(cfg.seed);
  const auto bases = make_identity_bases(cfg.scheme, n, cfg.embedding_length, rng);

  Scenario out;
  out.gt.width = cfg.width;
  out.gt.height = cfg.height;
  out.gt.frames.resize(cfg.n_frames);
  out.detections.resize(cfg.n_frames);
  out.has_stacks = cfg.emit_feature_maps;
  if (cfg.emit_feature_maps) out.stacks.resize(cfg.n_frames);

  std::vector<int> slot(n);
  std::iota(slot.begin(), slot.end(), 0);

  for (int t = 0; t < cfg.n_frames; ++t) {
    // Positions: either on the identity's current path slot or blending
    // between the two exchanged slots during a crossing.
    std::vector<std::pair<double, double>> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = detail::base_position(cfg.identities[slot[i]].motion, t);
    for (const auto& ev : cfg.crossings) {
      if (t < ev.frame_start || t > ev.frame_end) continue;
      const double span = ev.frame_end - ev.frame_start;
      const double u = (t - ev.frame_start) / span;
      // Cubic Hermite blend keeps velocities continuous at both event ends,
      // so Kalman gating is not tripped by the path exchange itself.
      const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
      const double h10 = u * (1 - u) * (1 - u);
      const double h01 = u * u * (3 - 2 * u);
      const double h11 = u * u * (u - 1);
      auto blend = [&](int from_slot, int to_slot) -> std::pair<double, double> {
        const MotionSpec& m0 = cfg.identities[from_slot].motion;
        const MotionSpec& m1 = cfg.identities[to_slot].motion;
        const auto p0 = detail::base_position(m0, ev.frame_start);
        const auto p1 = detail::base_position(m1, ev.frame_end);
        return {h00 * p0.first + h10 * span * m0.vx + h01 * p1.first + h11 * span * m1.vx,
                h00 * p0.second + h10 * span * m0.vy + h01 * p1.second + h11 * span * m1.vy};
      };
      pos[ev.a] = blend(slot[ev.a], slot[ev.b]);
      pos[ev.b] = blend(slot[ev.b], slot[ev.a]);
    }

    std::vector<BinaryMask> masks(n);
    for (int i = 0; i < n; ++i) {
      const ShapeSpec& shape = cfg.identities[i].shape;
      const auto p = detail::shape_pose(shape, pos[i].first, pos[i].second, t);
      masks[i] = detail::rasterize(shape, p, cfg.width, cfg.height);
      out.gt.frames[t].emplace_back(i + 1, masks[i]);
    }

    std::vector<Eigen::VectorXd> vectors(n);
    std::vector<bool> dropped(n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd noise(cfg.embedding_length);
      for (int k = 0; k < cfg.embedding_length; ++k) noise(k) = rng.next_gaussian();
      Eigen::VectorXd v = bases[i] + cfg.embedding_noise * noise;
      const double nv = v.norm();
      vectors[i] = nv > 1e-12 ? Eigen::VectorXd(v / nv) : bases[i];
      dropped[i] = rng.next_double() < cfg.drop_probability;
      for (const auto& ev : cfg.scripted_drops)
        if (ev.identity == i && t >= ev.frame_start && t <= ev.frame_end) dropped[i] = true;
    }

    if (cfg.emit_feature_maps)
      out.stacks[t] = detail::build_stack(masks, vectors, cfg.width, cfg.height, cfg.map_stride,
                                          cfg.map_fill_radius);

    for (int i = 0; i < n; ++i) {
      if (dropped[i]) continue;
      Eigen::VectorXd emb =
          cfg.emit_feature_maps ? Eigen::VectorXd() : vectors[i];
      Detection d;
      d.frame_index = t;
      d.box = bbox_of(masks[i]);
      d.mask = masks[i];
      d.confidence = 1.0;
      d.embedding = std::move(emb);
      out.detections[t].push_back(std::move(d));
    }

    for (const auto& ev : cfg.crossings)
      if (t == ev.frame_end) std::swap(slot[ev.a], slot[ev.b]);
  }
  return out;
}

/// Sampling point for a detection under the configured strategy.
inline Centroid sampling_point(const BinaryMask& mask, SamplingStrategy strategy) {
  if (strategy == SamplingStrategy::CentroidMaxContour) return centroid(mask);
  const BoundingBox box = bbox_of(mask);
  return Centroid{box.center_x(), box.center_y()};
}

/// Fills detection embeddings by sampling the per-frame feature map stacks.
inline void embed_from_stacks(Scenario& scenario, SamplingStrategy strategy,
                              int embedding_length) {
  if (!scenario.has_stacks) throw std::invalid_argument("scenario has no feature maps");
  for (std::size_t t = 0; t < scenario.detections.size(); ++t)
    for (auto& det : scenario.detections[t])
      det.embedding =
          sample_embedding(scenario.stacks[t], sampling_point(det.mask, strategy), embedding_length);
}

/// Two identities whose bounding-box centers coincide while their largest-
/// component centroids stay far apart: an L-shaped mask wrapping a smaller
/// square held in its notch. The pair translates together; the square slides
/// in from the right, holds the coincident position, then slides back out.
struct CoincidenceParams {
  int n_frames = 40;
  int width = 360, height = 140;
  double speed = 6.0;          // pair translation, px/frame
  double l_box = 68.0, l_arm = 25.0;
  double square = 10.0;
  int slide_in_start = 8, hold_start = 14, hold_end = 26, slide_out_end = 32;
  double offset = 70.0;        // square's resting x offset outside the notch
  double noise = 0.0;
  std::uint64_t seed = 0;
  double map_stride = 4.0;
  int embedding_length = 8;
};

inline Scenario center_coincidence_scenario(const CoincidenceParams& p) {
  RandomStream rng(p.seed);
  const auto bases = make_identity_bases(EmbeddingScheme::Orthogonal, 2, p.embedding_length, rng);

  ShapeSpec l_shape{ShapeKind::LShape, p.l_box, p.l_arm};
  ShapeSpec sq_shape{ShapeKind::Rectangle, p.square, p.square};

  Scenario out;
  out.gt.width = p.width;
  out.gt.height = p.height;
  out.gt.frames.resize(p.n_frames);
  out.detections.resize(p.n_frames);
  out.stacks.resize(p.n_frames);
  out.has_stacks = true;

  for (int t = 0; t < p.n_frames; ++t) {
    const double lx = p.l_box / 2.0 + 4.0 + p.speed * t;
    const double ly = p.height / 2.0;
    double rel;  // square center offset from the L's box center
    if (t < p.slide_in_start) {
      rel = p.offset;
    } else if (t < p.hold_start) {
      const double u = static_cast<double>(t - p.slide_in_start) / (p.hold_start - p.slide_in_start);
      rel = p.offset * (1.0 - u);
    } else if (t <= p.hold_end) {
      rel = 0.0;
    } else if (t <= p.slide_out_end) {
      const double u = static_cast<double>(t - p.hold_end) / (p.slide_out_end - p.hold_end);
      rel = p.offset * u;
    } else {
      rel = p.offset;
    }

    std::vector<BinaryMask> masks(2);
    masks[0] = detail::rasterize(l_shape, detail::shape_pose(l_shape, lx, ly, t), p.width, p.height);
    masks[1] = detail::rasterize(sq_shape, detail::shape_pose(sq_shape, lx + rel, ly, t), p.width,
                                 p.height);
    out.gt.frames[t].emplace_back(1, masks[0]);
    out.gt.frames[t].emplace_back(2, masks[1]);

    std::vector<Eigen::VectorXd> vectors(2);
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd noise(p.embedding_length);
      for (int k = 0; k < p.embedding_length; ++k) noise(k) = rng.next_gaussian();
      Eigen::VectorXd v = bases[i] + p.noise * noise;
      vectors[i] = v / v.norm();
    }
    out.stacks[t] =
        detail::build_stack(masks, vectors, p.width, p.height, p.map_stride, 8.0);

    for (int i = 0; i < 2; ++i) {
      Detection d;
      d.frame_index = t;
      d.box = bbox_of(masks[i]);
      d.mask = masks[i];
      d.confidence = 1.0;
      out.detections[t].push_back(std::move(d));
    }
  }
  return out;
}

inline Scenario center_coincidence_fixture() { return center_coincidence_scenario({}); }

}  // namespace vistrack
