#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vistrack/mask.hpp"

namespace vistrack {

/// Constant-velocity state over (cx, cy, s, r): box center, area, aspect
/// ratio w/h, plus their per-frame velocities.
struct KalmanState {
  Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Zero();
};

/// Noise std factors, scaled by box height (position/measurement) and box
/// area (the area component).
struct MotionNoise {
  double position_weight = 1.0 / 20;
  double velocity_weight = 1.0 / 160;
};

/// 0.95 quantile of chi-square with 4 degrees of freedom; default gate bound.
inline constexpr double kChi2Gate95 = 9.4877;

namespace detail {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

inline Mat8 transition_matrix() {
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, 4 + i) = 1.0;
  return f;
}

inline Mat48 measurement_matrix() {
  Mat48 h = Mat48::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

inline double state_height(const Vec8& mean) {
  const double s = std::max(mean(2), 1e-6);
  const double r = std::max(mean(3), 1e-6);
  return std::sqrt(s / r);
}

// Aspect-ratio noise scales with the elongation in either direction:
// errors on thin boxes are multiplicative, not additive.
inline double ratio_scale(const Vec8& mean) {
  const double r = std::max(mean(3), 1e-6);
  return std::max(r, 1.0 / r);
}

inline Vec8 process_noise_std(const Vec8& mean, const MotionNoise& noise) {
  const double h = state_height(mean);
  const double s = std::max(mean(2), 1e-6);
  const double rs = ratio_scale(mean);
  Vec8 std;
  std << noise.position_weight * h, noise.position_weight * h, noise.position_weight * s,
      1e-2 * rs, noise.velocity_weight * h, noise.velocity_weight * h,
      noise.velocity_weight * s, 1e-5 * rs;
  return std;
}

inline Vec4 measurement_noise_std(const Vec8& mean, const MotionNoise& noise) {
  const double h = state_height(mean);
  const double s = std::max(mean(2), 1e-6);
  Vec4 std;
  std << noise.position_weight * h, noise.position_weight * h, noise.position_weight * s,
      1e-1 * ratio_scale(mean);
  return std;
}

inline void symmetrize(Mat8& p) { p = ((p + p.transpose()) * 0.5).eval(); }

}  // namespace detail

inline Eigen::Matrix<double, 4, 1> box_to_measurement(const BoundingBox& box) {
  const double w = box.width(), h = box.height();
  if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("box must have positive area");
  Eigen::Matrix<double, 4, 1> z;
  z << box.center_x(), box.center_y(), w * h, w / h;
  return z;
}

inline KalmanState kf_init(const BoundingBox& box, const MotionNoise& noise = {}) {
  const auto z = box_to_measurement(box);
  KalmanState state;
  state.mean.head<4>() = z;
  const double h = detail::state_height(state.mean);
  const double s = std::max(state.mean(2), 1e-6);
  // Velocities start unobserved: broad priors let the first updates pin them.
  Eigen::Matrix<double, 8, 1> std;
  std << 2 * noise.position_weight * h, 2 * noise.position_weight * h,
      2 * noise.position_weight * s, 1e-1, 10 * h, 10 * h, 10 * s, 1e-1;
  state.covariance = std.array().square().matrix().asDiagonal();
  return state;
}

inline KalmanState kf_predict(const KalmanState& state, const MotionNoise& noise = {}) {
  if (!state.mean.allFinite() || !state.covariance.allFinite())
    throw std::invalid_argument("non-finite kalman state");
  const auto f = detail::transition_matrix();
  const auto q_std = detail::process_noise_std(state.mean, noise);
  KalmanState out;
  out.mean = f * state.mean;
  out.covariance = f * state.covariance * f.transpose();
  out.covariance += detail::Mat8(q_std.array().square().matrix().asDiagonal());
  detail::symmetrize(out.covariance);
  return out;
}

inline KalmanState kf_update(const KalmanState& state, const BoundingBox& box,
                             const MotionNoise& noise = {}) {
  if (!state.mean.allFinite() || !state.covariance.allFinite())
    throw std::invalid_argument("non-finite kalman state");
  const auto z = box_to_measurement(box);
  const auto h = detail::measurement_matrix();
  const auto r_std = detail::measurement_noise_std(state.mean, noise);
  const detail::Mat4 r_cov = r_std.array().square().matrix().asDiagonal();
  const detail::Mat4 innovation_cov = h * state.covariance * h.transpose() + r_cov;
  const Eigen::Matrix<double, 8, 4> gain =
      innovation_cov.ldlt().solve(h * state.covariance).transpose();
  KalmanState out;
  out.mean = state.mean + gain * (z - h * state.mean);
  out.covariance = state.covariance - gain * innovation_cov * gain.transpose();
  detail::symmetrize(out.covariance);
  out.mean(2) = std::max(out.mean(2), 1e-6);  // area and aspect stay positive
  out.mean(3) = std::max(out.mean(3), 1e-6);
  return out;
}

/// Squared Mahalanobis distance of the box from the predicted measurement
/// distribution; expects a state already predicted to the current frame.
inline double gating_distance(const KalmanState& state, const BoundingBox& box,
                              const MotionNoise& noise = {}) {
  const auto z = box_to_measurement(box);
  const auto h = detail::measurement_matrix();
  const auto r_std = detail::measurement_noise_std(state.mean, noise);
  const detail::Mat4 r_cov = r_std.array().square().matrix().asDiagonal();
  const detail::Mat4 innovation_cov = h * state.covariance * h.transpose() + r_cov;
  const Eigen::LLT<detail::Mat4> llt(innovation_cov);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const detail::Vec4 innovation = z - h * state.mean;
  return innovation.dot(llt.solve(innovation));
}

/// True when the box's motion is consistent with the prediction. A singular
/// innovation covariance fails the gate (degenerate state).
inline bool gate(const KalmanState& state, const BoundingBox& box, double threshold,
                 const MotionNoise& noise = {}) {
  if (std::isinf(threshold) && threshold > 0) return true;  // gating disabled
  return gating_distance(state, box, noise) <= threshold;
}

}  // namespace vistrack
