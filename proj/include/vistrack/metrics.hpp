#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vistrack/assignment.hpp"
#include "vistrack/mask.hpp"

namespace vistrack {

/// Identity-labelled mask stream: per frame, (id, mask) pairs with distinct
/// ids inside a frame.
struct LabeledSequence {
  int width = 0;
  int height = 0;
  std::vector<std::vector<std::pair<int, BinaryMask>>> frames;

  void validate() const {
    for (const auto& frame : frames) {
      std::set<int> seen;
      for (const auto& [id, mask] : frame) {
        if (!seen.insert(id).second) throw std::invalid_argument("duplicate id within a frame");
        if (mask.width != width || mask.height != height)
          throw std::invalid_argument("mask dimension mismatch");
      }
    }
  }
};

struct AlphaMetrics {
  double alpha = 0.0;
  double hota = 0.0;
  double det_a = 0.0;
  double ass_a = 0.0;
  double det_re = 0.0;
  double det_pr = 0.0;
  double ass_re = 0.0;
  double ass_pr = 0.0;
  double loc_a = 0.0;
};

struct MetricsReport {
  double hota = 0.0;
  double det_a = 0.0;
  double ass_a = 0.0;
  double det_re = 0.0;
  double det_pr = 0.0;
  double ass_re = 0.0;
  double ass_pr = 0.0;
  double loc_a = 0.0;
  long ids = 0;
  std::vector<AlphaMetrics> per_alpha;  // alpha = 0.05 .. 0.95
};

/// Maximum-cardinality matching on mask IOU restricted to pairs with
/// IOU >= alpha, maximizing total IOU among such matchings.
inline std::vector<std::pair<int, int>> match_frame(const std::vector<BinaryMask>& gt,
                                                    const std::vector<BinaryMask>& pred,
                                                    double alpha) {
  if (gt.empty() || pred.empty()) return {};
  Eigen::MatrixXd iou(gt.size(), pred.size());
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) iou(i, j) = mask_iou(gt[i], pred[j]);
  Eigen::MatrixXd cost(gt.size(), pred.size());
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j)
      cost(i, j) =
          iou(i, j) >= alpha ? -iou(i, j) : std::numeric_limits<double>::infinity();
  return solve_assignment(cost).pairs;
}

namespace detail {

struct FrameMatch {
  std::vector<std::pair<int, int>> pairs;  // (gt index, pred index)
  std::vector<double> ious;                // aligned with pairs
};

// Matches every frame at one alpha from precomputed IOU matrices.
inline std::vector<FrameMatch> match_all(const std::vector<Eigen::MatrixXd>& ious, double alpha) {
  std::vector<FrameMatch> out(ious.size());
  for (std::size_t f = 0; f < ious.size(); ++f) {
    const Eigen::MatrixXd& iou = ious[f];
    if (iou.rows() == 0 || iou.cols() == 0) continue;
    Eigen::MatrixXd cost(iou.rows(), iou.cols());
    for (int i = 0; i < iou.rows(); ++i)
      for (int j = 0; j < iou.cols(); ++j)
        cost(i, j) =
            iou(i, j) >= alpha ? -iou(i, j) : std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : solve_assignment(cost).pairs) {
      out[f].pairs.emplace_back(i, j);
      out[f].ious.push_back(iou(i, j));
    }
  }
  return out;
}

inline double rate(double num, double den, bool both_empty) {
  if (den == 0.0) return both_empty ? 1.0 : 0.0;
  return num / den;
}

}  // namespace detail

/// HOTA-family evaluation plus ID-switch count (counted at alpha = 0.5).
inline MetricsReport evaluate(const LabeledSequence& gt, const LabeledSequence& pred) {
  if (gt.frames.size() != pred.frames.size())
    throw std::invalid_argument("frame count mismatch");
  gt.validate();
  pred.validate();
  const std::size_t n_frames = gt.frames.size();

  std::size_t total_gt = 0, total_pred = 0;
  std::map<int, long> gt_presence, pred_presence;
  std::vector<Eigen::MatrixXd> ious(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    total_gt += gt.frames[f].size();
    total_pred += pred.frames[f].size();
    for (const auto& [id, m] : gt.frames[f]) gt_presence[id] += 1;
    for (const auto& [id, m] : pred.frames[f]) pred_presence[id] += 1;
    Eigen::MatrixXd iou(gt.frames[f].size(), pred.frames[f].size());
    for (std::size_t i = 0; i < gt.frames[f].size(); ++i)
      for (std::size_t j = 0; j < pred.frames[f].size(); ++j)
        iou(i, j) = mask_iou(gt.frames[f][i].second, pred.frames[f][j].second);
    ious[f] = std::move(iou);
  }
  const bool both_empty = total_gt == 0 && total_pred == 0;

  MetricsReport report;
  for (int a = 1; a <= 19; ++a) {
    const double alpha = a / 20.0;
    const auto matches = detail::match_all(ious, alpha);

    long tp = 0;
    double iou_sum = 0.0;
    std::map<std::pair<int, int>, long> pair_count;  // (gt id, pred id) -> matched frames
    for (std::size_t f = 0; f < n_frames; ++f) {
      for (std::size_t k = 0; k < matches[f].pairs.size(); ++k) {
        const auto [i, j] = matches[f].pairs[k];
        ++tp;
        iou_sum += matches[f].ious[k];
        pair_count[{gt.frames[f][i].first, pred.frames[f][j].first}] += 1;
      }
    }
    const long fn = static_cast<long>(total_gt) - tp;
    const long fp = static_cast<long>(total_pred) - tp;

    double ass_a_sum = 0.0, ass_re_sum = 0.0, ass_pr_sum = 0.0;
    for (const auto& [ids, count] : pair_count) {
      const long gt_total = gt_presence[ids.first];
      const long pred_total = pred_presence[ids.second];
      // Each of the `count` TPs with this id pair contributes the same ratio.
      ass_a_sum += count * (static_cast<double>(count) / (gt_total + pred_total - count));
      ass_re_sum += count * (static_cast<double>(count) / gt_total);
      ass_pr_sum += count * (static_cast<double>(count) / pred_total);
    }

    AlphaMetrics m;
    m.alpha = alpha;
    m.det_a = detail::rate(tp, tp + fn + fp, both_empty);
    m.det_re = detail::rate(tp, tp + fn, both_empty);
    m.det_pr = detail::rate(tp, tp + fp, both_empty);
    m.ass_a = detail::rate(ass_a_sum, tp, both_empty);
    m.ass_re = detail::rate(ass_re_sum, tp, both_empty);
    m.ass_pr = detail::rate(ass_pr_sum, tp, both_empty);
    m.loc_a = detail::rate(iou_sum, tp, both_empty);
    m.hota = std::sqrt(m.det_a * m.ass_a);
    report.per_alpha.push_back(m);

    report.hota += m.hota / 19.0;
    report.det_a += m.det_a / 19.0;
    report.ass_a += m.ass_a / 19.0;
    report.det_re += m.det_re / 19.0;
    report.det_pr += m.det_pr / 19.0;
    report.ass_re += m.ass_re / 19.0;
    report.ass_pr += m.ass_pr / 19.0;
    report.loc_a += m.loc_a / 19.0;
  }

  // ID switches at alpha 0.5: a TP whose ground-truth id was last matched to
  // a different predicted id.
  const auto matches = detail::match_all(ious, 0.5);
  std::map<int, int> last_pred;
  for (std::size_t f = 0; f < n_frames; ++f) {
    for (const auto& [i, j] : matches[f].pairs) {
      const int gid = gt.frames[f][i].first;
      const int pid = pred.frames[f][j].first;
      const auto it = last_pred.find(gid);
      if (it != last_pred.end() && it->second != pid) ++report.ids;
      last_pred[gid] = pid;
    }
  }
  return report;
}

}  // namespace vistrack
