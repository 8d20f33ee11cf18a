#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "vistrack/random.hpp"
#include "vistrack/simulator.hpp"
#include "vistrack/tracker.hpp"

namespace vistrack {

/// Canned scenario families used by the CLI presets and the verification
/// suites. Each builder is deterministic in its arguments.

/// Identities marching along horizontal lanes, no interaction.
inline ScenarioConfig basic_scenario(std::uint64_t seed, int n_identities = 10,
                                     int n_frames = 100, double noise = 0.0, double drop = 0.0) {
  ScenarioConfig cfg;
  cfg.n_frames = n_frames;
  cfg.width = 640;
  cfg.height = 360;
  cfg.seed = seed;
  cfg.embedding_length = 16;
  cfg.embedding_noise = noise;
  cfg.drop_probability = drop;
  if (n_identities > 10) throw std::invalid_argument("preset supports up to 10 identities");
  for (int i = 0; i < n_identities; ++i) {
    IdentitySpec id;
    id.shape.kind = i % 2 == 0 ? ShapeKind::Rectangle : ShapeKind::Ellipse;
    id.shape.width = 16.0 + 2.0 * i;
    id.shape.height = 24.0 + 1.5 * i;
    id.motion.x0 = 60.0 + 120.0 * (i / 5);
    id.motion.y0 = 48.0 + 64.0 * (i % 5);
    id.motion.vx = 4.0;
    id.motion.vy = 0.0;
    cfg.identities.push_back(id);
  }
  return cfg;
}

/// The basic layout plus two scripted crossings: vertically adjacent pairs
/// exchange lanes mid-sequence, meeting (and overlapping) halfway.
inline ScenarioConfig crossing_scenario(std::uint64_t seed, double noise = 0.0,
                                        double drop = 0.0, int n_frames = 100) {
  ScenarioConfig cfg = basic_scenario(seed, 10, n_frames, noise, drop);
  cfg.crossings.push_back(CrossingEvent{0, 1, 30, 50});  // same column, adjacent lanes
  cfg.crossings.push_back(CrossingEvent{7, 8, 60, 80});
  return cfg;
}

/// Pairs of thin, slowly rotating ellipses exchange lanes while both go
/// undetected through the middle of the exchange, longer than the node
/// memory holds. Their tracks fall out of feature memory, so re-capture is
/// decided by the IOU stage between two stale candidates whose bounding
/// boxes are near-interchangeable but whose rotated contours are not, and by
/// the motion gate vetoing the stale candidate moving the wrong way.
inline ScenarioConfig deformation_scenario(std::uint64_t seed, int n_frames = 80) {
  ScenarioConfig cfg;
  cfg.n_frames = n_frames;
  cfg.width = 300;
  cfg.height = 230;
  cfg.seed = seed;
  cfg.scheme = EmbeddingScheme::Orthogonal;
  cfg.embedding_length = 16;
  cfg.embedding_noise = 0.15;
  cfg.drop_probability = 0.03;
  RandomStream layout(seed ^ 0x9e3779b97f4a7c15ULL);  // layout draws, separate from generate()
  for (int i = 0; i < 6; ++i) {
    IdentitySpec id;
    id.shape.kind = ShapeKind::Ellipse;
    id.shape.width = 52.0;
    id.shape.height = 12.0;
    id.shape.rotate_rate = 0.04 + 0.02 * layout.next_double();
    // Pair members spin a quarter turn out of phase.
    id.shape.rotate_phase = layout.next_uniform(0.0, 2.0 * M_PI) + (i % 2) * M_PI / 2.0;
    id.motion.x0 = 60.0 + 4.0 * (i % 2);
    id.motion.y0 = 42.0 + 26.0 * i;
    id.motion.vx = 1.5;
    id.motion.vy = 0.0;
    cfg.identities.push_back(id);
  }
  cfg.crossings.push_back(CrossingEvent{0, 1, 18, 38});
  cfg.crossings.push_back(CrossingEvent{2, 3, 30, 50});
  cfg.crossings.push_back(CrossingEvent{4, 5, 42, 62});
  for (int k = 0; k < 3; ++k) {
    const int mid = cfg.crossings[k].frame_start + 10;
    cfg.scripted_drops.push_back(DropEvent{2 * k, mid - 3, mid + 2});
    cfg.scripted_drops.push_back(DropEvent{2 * k + 1, mid - 1, mid + 4});
  }
  return cfg;
}

/// Tracker settings matched to the desk-scale scenarios above: small instance
/// cap (so softmax mass is not spread over empty padding slots), an
/// acceptance threshold placed between the typical correct-pair and
/// wrong-pair probabilities, and a gate wide enough to keep a briefly
/// coasted track through a curving path while still vetoing far candidates.
inline TrackerConfig scenario_tracker_config(int max_instances = 10, int embedding_length = 16) {
  TrackerConfig cfg;
  cfg.max_instances = max_instances;
  cfg.embedding_length = embedding_length;
  cfg.feature_threshold = 0.12;
  cfg.gate_threshold = 16.0;
  return cfg;
}

inline TrackerConfig coincidence_tracker_config() {
  TrackerConfig cfg;
  cfg.max_instances = 6;
  cfg.embedding_length = 8;
  cfg.feature_threshold = 0.25;
  cfg.gate_threshold = 16.0;
  return cfg;
}

inline TrackerConfig deformation_tracker_config() {
  TrackerConfig cfg;
  cfg.max_instances = 8;
  cfg.embedding_length = 16;
  cfg.feature_threshold = 0.15;
  // Oscillating thin shapes bend the constant-velocity assumption for the
  // box area and ratio; the gate needs slack there while still vetoing the
  // cross-lane and wrong-way candidates, which sit far beyond this bound.
  cfg.gate_threshold = 35.0;
  return cfg;
}

}  // namespace vistrack
