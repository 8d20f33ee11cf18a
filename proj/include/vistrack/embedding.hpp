#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vistrack/mask.hpp"

namespace vistrack {

/// One dense feature map. Values are laid out channel-major: value(c, y, x)
/// lives at c*height*width + y*width + x. `stride` is input pixels per cell.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  double stride = 1.0;
  std::vector<double> values;

  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Multi-scale stack; concatenated channel counts form the embedding length.
struct FeatureMapStack {
  std::vector<FeatureMap> maps;

  int total_channels() const {
    int total = 0;
    for (const auto& m : maps) total += m.channels;
    return total;
  }
};

/// Reads the per-map feature vector at the centroid's cell (nearest cell,
/// floor of the scaled coordinate, clamped to map bounds) and concatenates
/// in map order.
inline Eigen::VectorXd sample_embedding(const FeatureMapStack& stack, const Centroid& c,
                                        int embedding_length) {
  if (stack.total_channels() != embedding_length)
    throw std::invalid_argument("feature map channels do not sum to embedding length");
  Eigen::VectorXd out(embedding_length);
  int offset = 0;
  for (const auto& map : stack.maps) {
    const int cx = std::clamp(static_cast<int>(std::floor(c.x / map.stride)), 0, map.width - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(c.y / map.stride)), 0, map.height - 1);
    for (int ch = 0; ch < map.channels; ++ch) out(offset + ch) = map.at(ch, cy, cx);
    offset += map.channels;
  }
  return out;
}

/// Per-frame appearance matrix: e x max_instances, zero-padded columns past
/// `count`. Column order matches detection order within the frame.
struct EmbeddingMatrix {
  Eigen::MatrixXd values;
  int count = 0;

  int embedding_length() const { return static_cast<int>(values.rows()); }
  int max_instances() const { return static_cast<int>(values.cols()); }
};

enum class OverflowMode { Strict, Lenient };

/// Indices of the `max_instances` highest-confidence detections, returned in
/// original order. Confidence ties keep the earlier detection.
inline std::vector<int> lenient_keep_indices(const std::vector<double>& confidences,
                                             int max_instances) {
  std::vector<int> order(confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return confidences[a] > confidences[b]; });
  if (static_cast<int>(order.size()) > max_instances) order.resize(max_instances);
  std::sort(order.begin(), order.end());
  return order;
}

inline EmbeddingMatrix build_embedding_matrix(const std::vector<Eigen::VectorXd>& embeddings,
                                              int embedding_length, int max_instances,
                                              OverflowMode mode = OverflowMode::Strict,
                                              const std::vector<double>& confidences = {}) {
  std::vector<int> keep(embeddings.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (static_cast<int>(embeddings.size()) > max_instances) {
    if (mode == OverflowMode::Strict) throw std::invalid_argument("instance overflow");
    if (confidences.size() != embeddings.size())
      throw std::invalid_argument("lenient overflow requires confidences");
    keep = lenient_keep_indices(confidences, max_instances);
  }
  EmbeddingMatrix out;
  out.values = Eigen::MatrixXd::Zero(embedding_length, max_instances);
  out.count = static_cast<int>(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Eigen::VectorXd& v = embeddings[keep[k]];
    if (v.size() != embedding_length) throw std::invalid_argument("embedding length mismatch");
    out.values.col(static_cast<int>(k)) = v;
  }
  return out;
}

}  // namespace vistrack
