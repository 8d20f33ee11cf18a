#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vistrack/affinity.hpp"
#include "vistrack/assignment.hpp"
#include "vistrack/embedding.hpp"
#include "vistrack/kalman.hpp"
#include "vistrack/mask.hpp"

namespace vistrack {

enum class SamplingStrategy { CentroidMaxContour, BboxCenter };
enum class IouMode { Mask, Bbox, None };

struct TrackerConfig {
  int max_instances = 50;        // most detections kept per frame
  int max_pair_gap = 10;         // largest frame gap for affinity training pairs
  int max_coast_age = 30;        // frames a track may stay unmatched
  int embedding_length = 352;
  double entry_exit_score = 0.2;  // constant score of the padded entry/exit slots
  double feature_threshold = 0.5;
  double iou_threshold = 0.3;
  double gate_threshold = kChi2Gate95;  // +inf disables motion gating
  int fusion_depth = 4;
  SamplingStrategy sampling_strategy = SamplingStrategy::CentroidMaxContour;
  IouMode iou_mode = IouMode::Mask;
  int history_cap = 30;
  int coast_output = 2;  // unmatched frames for which a track still emits its last mask
  OverflowMode overflow = OverflowMode::Strict;
  MotionNoise noise;
};

struct Detection {
  int frame_index = 0;
  BinaryMask mask;
  BoundingBox box;  // always bbox_of(mask)
  double confidence = 1.0;
  Eigen::VectorXd embedding;
};

inline Detection make_detection(int frame_index, BinaryMask mask, double confidence,
                                Eigen::VectorXd embedding) {
  Detection d;
  d.frame_index = frame_index;
  d.box = bbox_of(mask);
  d.mask = std::move(mask);
  d.confidence = confidence;
  d.embedding = std::move(embedding);
  return d;
}

enum class TrackStatus { Active, Removed };

struct Track {
  int id = 0;
  KalmanState kstate;
  BinaryMask last_mask;
  std::deque<Eigen::VectorXd> embedding_history;
  int age = 0;                // frames since creation
  int time_since_update = 0;  // frames since last accepted detection
  double last_confidence = 0.0;
  TrackStatus status = TrackStatus::Active;
};

/// Per-timestamp memory: every detection's embedding plus the track id it was
/// assigned, aligned to the matrix's real columns.
struct NodeRecord {
  int timestamp = 0;
  EmbeddingMatrix embeddings;
  std::vector<int> track_ids;
};

struct TrackOutput {
  int frame_index = 0;
  int track_id = 0;
  BinaryMask mask;
  double score = 0.0;
};

struct FrameReport {
  int frame_index = 0;
  std::vector<int> kept_detections;     // indices into the input list (lenient mode may drop)
  std::vector<int> detection_track_ids; // aligned with kept_detections
  std::vector<int> new_track_ids;
  std::vector<int> removed_track_ids;
  std::vector<TrackOutput> outputs;
};

/// Similarity of one stored node against the current frame. Entry (x, y) for
/// real pairs is max of the forward/reverse probabilities; the appended last
/// column holds each node instance's exit probability. Shape is trimmed to
/// the actual instance counts: n_node x (n_cur + 1).
inline Eigen::MatrixXd pair_similarity(const NodeRecord& node, const EmbeddingMatrix& current,
                                       const TrackerConfig& cfg,
                                       const AffinityScorer& scorer = cosine_scorer) {
  if (node.embeddings.embedding_length() != cfg.embedding_length ||
      current.embedding_length() != cfg.embedding_length)
    throw std::invalid_argument("embedding length mismatch");
  const AffinityResult aff = compute_affinity(current, node.embeddings, cfg.entry_exit_score, scorer);
  const int n_node = node.embeddings.count;
  const int n_cur = current.count;
  const int n = cfg.max_instances;
  Eigen::MatrixXd sim(n_node, n_cur + 1);
  for (int x = 0; x < n_node; ++x) {
    for (int y = 0; y < n_cur; ++y) sim(x, y) = std::max(aff.p_fw(x, y), aff.p_rv(x, y));
    sim(x, n_cur) = aff.p_rv(x, n);
  }
  return sim;
}

/// Entrywise median across the latest nodes, re-indexed by track id. A track
/// missing from a node contributes nothing to that entry's median; a track
/// absent from every node scores 0 throughout its row.
inline Eigen::MatrixXd fuse_similarity(const std::deque<NodeRecord>& nodes,
                                       const EmbeddingMatrix& current,
                                       const std::map<int, int>& track_row, int n_rows,
                                       const TrackerConfig& cfg,
                                       const AffinityScorer& scorer = cosine_scorer) {
  const int n_cur = current.count;
  std::vector<std::vector<std::vector<double>>> gathered(
      n_rows, std::vector<std::vector<double>>(n_cur + 1));
  const std::size_t depth = std::min<std::size_t>(nodes.size(), cfg.fusion_depth);
  for (std::size_t k = nodes.size() - depth; k < nodes.size(); ++k) {
    const NodeRecord& node = nodes[k];
    if (node.embeddings.count == 0) continue;
    const Eigen::MatrixXd sim = pair_similarity(node, current, cfg, scorer);
    for (int x = 0; x < node.embeddings.count; ++x) {
      const auto it = track_row.find(node.track_ids[x]);
      if (it == track_row.end()) continue;
      for (int y = 0; y <= n_cur; ++y) gathered[it->second][y].push_back(sim(x, y));
    }
  }
  Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(n_rows, n_cur + 1);
  for (int r = 0; r < n_rows; ++r) {
    for (int y = 0; y <= n_cur; ++y) {
      auto& vals = gathered[r][y];
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      const std::size_t m = vals.size();
      fused(r, y) = (m % 2 == 1) ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    }
  }
  return fused;
}

/// Stateful trajectory generator: per frame it fuses node similarities,
/// gates by motion, runs the feature and IOU association stages, and manages
/// track lifecycle. Single writer per sequence; distinct sequences are
/// independent.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg, AffinityScorer scorer = cosine_scorer)
      : cfg_(std::move(cfg)), scorer_(std::move(scorer)) {}

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const std::deque<NodeRecord>& nodes() const { return nodes_; }

  FrameReport step(int frame_index, const std::vector<Detection>& detections_in) {
    if (frame_index <= last_frame_)
      throw std::invalid_argument("frame indices must be strictly increasing");
    last_frame_ = frame_index;

    FrameReport report;
    report.frame_index = frame_index;

    // Overflow policy decides which detections participate at all.
    report.kept_detections.resize(detections_in.size());
    std::iota(report.kept_detections.begin(), report.kept_detections.end(), 0);
    if (static_cast<int>(detections_in.size()) > cfg_.max_instances) {
      if (cfg_.overflow == OverflowMode::Strict) throw std::invalid_argument("instance overflow");
      std::vector<double> conf;
      conf.reserve(detections_in.size());
      for (const auto& d : detections_in) conf.push_back(d.confidence);
      report.kept_detections = lenient_keep_indices(conf, cfg_.max_instances);
    }
    std::vector<const Detection*> dets;
    dets.reserve(report.kept_detections.size());
    for (int idx : report.kept_detections) {
      const Detection& d = detections_in[idx];
      if (d.embedding.size() != cfg_.embedding_length)
        throw std::invalid_argument("embedding length mismatch");
      dets.push_back(&d);
    }
    const int n_det = static_cast<int>(dets.size());
    const int n_tr = static_cast<int>(tracks_.size());

    for (auto& t : tracks_) {
      t.kstate = kf_predict(t.kstate, cfg_.noise);
      t.age += 1;
    }

    std::vector<Eigen::VectorXd> embeddings;
    embeddings.reserve(dets.size());
    for (const auto* d : dets) embeddings.push_back(d->embedding);
    const EmbeddingMatrix current = build_embedding_matrix(
        embeddings, cfg_.embedding_length, cfg_.max_instances, OverflowMode::Strict);

    std::vector<int> det_track(n_det, -1);
    std::vector<char> track_matched(n_tr, 0);

    if (!nodes_.empty() && n_tr > 0) {
      std::map<int, int> track_row;
      for (int r = 0; r < n_tr; ++r) track_row[tracks_[r].id] = r;
      Eigen::MatrixXd sim = fuse_similarity(nodes_, current, track_row, n_tr, cfg_, scorer_);

      // Motion gating removes candidates from both association stages.
      std::vector<char> allowed(static_cast<std::size_t>(n_tr) * std::max(n_det, 1), 1);
      auto allow = [&](int r, int y) -> char& {
        return allowed[static_cast<std::size_t>(r) * std::max(n_det, 1) + y];
      };
      for (int r = 0; r < n_tr; ++r)
        for (int y = 0; y < n_det; ++y)
          if (!gate(tracks_[r].kstate, dets[y]->box, cfg_.gate_threshold, cfg_.noise)) {
            allow(r, y) = 0;
            sim(r, y) = -std::numeric_limits<double>::infinity();
          }

      // Stage one: feature association on the fused similarities.
      if (n_det > 0) {
        Eigen::MatrixXd cost(n_tr, n_det);
        for (int r = 0; r < n_tr; ++r)
          for (int y = 0; y < n_det; ++y)
            cost(r, y) = std::isfinite(sim(r, y)) ? -sim(r, y)
                                                  : std::numeric_limits<double>::infinity();
        for (const auto& [r, y] : solve_assignment(cost).pairs) {
          const double s = sim(r, y);
          if (std::isfinite(s) && s >= cfg_.feature_threshold && s >= sim(r, n_det)) {
            det_track[y] = tracks_[r].id;
            track_matched[r] = 1;
          }
        }
      }

      // Stage two: IOU association on the leftovers.
      if (cfg_.iou_mode != IouMode::None && n_det > 0) {
        std::vector<int> rows, cols;
        for (int r = 0; r < n_tr; ++r)
          if (!track_matched[r]) rows.push_back(r);
        for (int y = 0; y < n_det; ++y)
          if (det_track[y] < 0) cols.push_back(y);
        if (!rows.empty() && !cols.empty()) {
          Eigen::MatrixXd overlap(rows.size(), cols.size());
          Eigen::MatrixXd cost(rows.size(), cols.size());
          for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = 0; b < cols.size(); ++b) {
              const Track& t = tracks_[rows[a]];
              const Detection& d = *dets[cols[b]];
              double v = 0.0;
              if (allow(rows[a], cols[b])) {
                v = cfg_.iou_mode == IouMode::Mask ? mask_iou(t.last_mask, d.mask)
                                                   : bbox_iou(bbox_of(t.last_mask), d.box);
                cost(a, b) = 1.0 - v;
              } else {
                cost(a, b) = std::numeric_limits<double>::infinity();
              }
              overlap(a, b) = v;
            }
          }
          for (const auto& [a, b] : solve_assignment(cost).pairs) {
            if (overlap(a, b) >= cfg_.iou_threshold) {
              det_track[cols[b]] = tracks_[rows[a]].id;
              track_matched[rows[a]] = 1;
            }
          }
        }
      }
    }

    // Apply accepted matches.
    for (int y = 0; y < n_det; ++y) {
      if (det_track[y] < 0) continue;
      Track& t = track_by_id(det_track[y]);
      t.kstate = kf_update(t.kstate, dets[y]->box, cfg_.noise);
      t.last_mask = dets[y]->mask;
      t.last_confidence = dets[y]->confidence;
      t.time_since_update = 0;
      t.embedding_history.push_back(dets[y]->embedding);
      while (static_cast<int>(t.embedding_history.size()) > cfg_.history_cap)
        t.embedding_history.pop_front();
    }

    // Leftover detections become new tracks.
    for (int y = 0; y < n_det; ++y) {
      if (det_track[y] >= 0) continue;
      Track t;
      t.id = next_id_++;
      t.kstate = kf_init(dets[y]->box, cfg_.noise);
      t.last_mask = dets[y]->mask;
      t.last_confidence = dets[y]->confidence;
      t.embedding_history.push_back(dets[y]->embedding);
      det_track[y] = t.id;
      report.new_track_ids.push_back(t.id);
      tracks_.push_back(std::move(t));
    }

    // Unmatched tracks coast; past the storage bound they are deleted.
    std::vector<Track> survivors;
    survivors.reserve(tracks_.size());
    for (auto& t : tracks_) {
      const bool matched =
          std::find(det_track.begin(), det_track.end(), t.id) != det_track.end();
      if (!matched) {
        t.time_since_update += 1;
        if (t.time_since_update > cfg_.max_coast_age) {
          t.status = TrackStatus::Removed;
          report.removed_track_ids.push_back(t.id);
          continue;
        }
      }
      survivors.push_back(std::move(t));
    }
    tracks_ = std::move(survivors);

    NodeRecord node;
    node.timestamp = frame_index;
    node.embeddings = current;
    node.track_ids = det_track;
    nodes_.push_back(std::move(node));
    while (static_cast<int>(nodes_.size()) > cfg_.fusion_depth) nodes_.pop_front();
    while (!nodes_.empty() && nodes_.front().timestamp <= frame_index - cfg_.fusion_depth)
      nodes_.pop_front();

    report.detection_track_ids = det_track;
    for (const auto& t : tracks_) {
      if (t.time_since_update > cfg_.coast_output) continue;
      report.outputs.push_back(TrackOutput{frame_index, t.id, t.last_mask, t.last_confidence});
    }
    return report;
  }

 private:
  Track& track_by_id(int id) {
    for (auto& t : tracks_)
      if (t.id == id) return t;
    throw std::logic_error("unknown track id");
  }

  TrackerConfig cfg_;
  AffinityScorer scorer_;
  std::vector<Track> tracks_;
  std::deque<NodeRecord> nodes_;
  int next_id_ = 1;
  int last_frame_ = -1;
};

}  // namespace vistrack
