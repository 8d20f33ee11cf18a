#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vistrack/embedding.hpp"

namespace vistrack {

/// Scores one previous-frame column against one current-frame column.
using AffinityScorer = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

inline double cosine_scorer(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}

inline double neg_squared_euclidean_scorer(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return -(a - b).squaredNorm();
}

/// Raw pairwise scores between two frames' embedding matrices. Row i is
/// instance i of the earlier frame, column j instance j of the later frame.
/// Pairs touching a zero-padded column score 0.
inline Eigen::MatrixXd affinity_scores(const EmbeddingMatrix& current,
                                       const EmbeddingMatrix& previous,
                                       const AffinityScorer& scorer = cosine_scorer) {
  if (current.embedding_length() != previous.embedding_length() ||
      current.max_instances() != previous.max_instances())
    throw std::invalid_argument("embedding matrix dimension mismatch");
  const int n = current.max_instances();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < previous.count; ++i)
    for (int j = 0; j < current.count; ++j)
      scores(i, j) = scorer(previous.values.col(i), current.values.col(j));
  return scores;
}

/// Appends the entry/exit score: m_fw gains a last row of gamma (detection is
/// new), m_rv gains a last column of gamma (tracked instance left).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> pad_dynamic(const Eigen::MatrixXd& raw_scores,
                                                               double gamma) {
  if (raw_scores.rows() != raw_scores.cols())
    throw std::invalid_argument("raw score matrix must be square");
  const int n = static_cast<int>(raw_scores.rows());
  Eigen::MatrixXd m_fw(n + 1, n);
  m_fw.topRows(n) = raw_scores;
  m_fw.row(n).setConstant(gamma);
  Eigen::MatrixXd m_rv(n, n + 1);
  m_rv.leftCols(n) = raw_scores;
  m_rv.col(n).setConstant(gamma);
  return {m_fw, m_rv};
}

namespace detail {

inline void softmax_column_inplace(Eigen::MatrixXd& m, int j) {
  const double mx = m.col(j).maxCoeff();
  m.col(j) = (m.col(j).array() - mx).exp();
  m.col(j) /= m.col(j).sum();
}

}  // namespace detail

/// Column softmax of m_fw and row softmax of m_rv, max-stabilized.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> normalize(const Eigen::MatrixXd& m_fw,
                                                             const Eigen::MatrixXd& m_rv) {
  Eigen::MatrixXd p_fw = m_fw;
  for (int j = 0; j < p_fw.cols(); ++j) detail::softmax_column_inplace(p_fw, j);
  Eigen::MatrixXd p_rv_t = m_rv.transpose();
  for (int j = 0; j < p_rv_t.cols(); ++j) detail::softmax_column_inplace(p_rv_t, j);
  return {p_fw, Eigen::MatrixXd(p_rv_t.transpose())};
}

/// Raw scores plus padded and normalized forward/reverse matrices.
struct AffinityResult {
  Eigen::MatrixXd t_prime;  // n x n raw scores
  Eigen::MatrixXd m_fw;     // (n+1) x n
  Eigen::MatrixXd m_rv;     // n x (n+1)
  Eigen::MatrixXd p_fw;     // column-stochastic
  Eigen::MatrixXd p_rv;     // row-stochastic
};

inline AffinityResult compute_affinity(const EmbeddingMatrix& current,
                                       const EmbeddingMatrix& previous, double gamma,
                                       const AffinityScorer& scorer = cosine_scorer) {
  AffinityResult r;
  r.t_prime = affinity_scores(current, previous, scorer);
  std::tie(r.m_fw, r.m_rv) = pad_dynamic(r.t_prime, gamma);
  std::tie(r.p_fw, r.p_rv) = normalize(r.m_fw, r.m_rv);
  return r;
}

/// Ground-truth association between two frames: g marks persisting pairs,
/// g_fw adds the entry row for unmatched current detections, g_rv the exit
/// column for unmatched previous instances. Padded slots stay zero.
struct GroundTruthAssociation {
  Eigen::MatrixXd g;     // n x n binary
  Eigen::MatrixXd g_fw;  // (n+1) x n
  Eigen::MatrixXd g_rv;  // n x (n+1)
};

inline GroundTruthAssociation make_ground_truth(int max_instances,
                                                const std::vector<std::pair<int, int>>& pairs,
                                                int n_prev, int n_cur) {
  if (n_prev < 0 || n_cur < 0 || n_prev > max_instances || n_cur > max_instances)
    throw std::invalid_argument("instance counts out of range");
  GroundTruthAssociation gt;
  gt.g = Eigen::MatrixXd::Zero(max_instances, max_instances);
  gt.g_fw = Eigen::MatrixXd::Zero(max_instances + 1, max_instances);
  gt.g_rv = Eigen::MatrixXd::Zero(max_instances, max_instances + 1);
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n_prev || j < 0 || j >= n_cur)
      throw std::invalid_argument("ground-truth pair index out of range");
    if (gt.g.row(i).sum() > 0 || gt.g.col(j).sum() > 0)
      throw std::invalid_argument("ground-truth pair repeats a row or column");
    gt.g(i, j) = 1.0;
  }
  gt.g_fw.topRows(max_instances) = gt.g;
  gt.g_rv.leftCols(max_instances) = gt.g;
  for (int j = 0; j < n_cur; ++j)
    if (gt.g.col(j).sum() == 0) gt.g_fw(max_instances, j) = 1.0;  // entered
  for (int i = 0; i < n_prev; ++i)
    if (gt.g.row(i).sum() == 0) gt.g_rv(i, max_instances) = 1.0;  // left
  return gt;
}

namespace detail {

constexpr double kProbClamp = 1e-12;

inline double masked_nll(const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) {
  if (p.rows() != g.rows() || p.cols() != g.cols())
    throw std::invalid_argument("probability/ground-truth shape mismatch");
  double total = 0.0, weight = 0.0;
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j)
      if (g(i, j) != 0.0) {
        total += g(i, j) * -std::log(std::max(p(i, j), kProbClamp));
        weight += g(i, j);
      }
  if (weight == 0.0) throw std::invalid_argument("no ground-truth pairs");
  return total / weight;
}

}  // namespace detail

inline double forward_loss(const Eigen::MatrixXd& p_fw, const Eigen::MatrixXd& g_fw) {
  return detail::masked_nll(p_fw, g_fw);
}

inline double reverse_loss(const Eigen::MatrixXd& p_rv, const Eigen::MatrixXd& g_rv) {
  return detail::masked_nll(p_rv, g_rv);
}

/// Non-maximum loss over the unpadded slices: -log of the elementwise max of
/// forward and reverse probabilities at each ground-truth pair.
inline double nonmax_loss(const Eigen::MatrixXd& p_fw, const Eigen::MatrixXd& p_rv,
                          const Eigen::MatrixXd& g) {
  const int n = static_cast<int>(g.rows());
  if (g.cols() != n || p_fw.rows() != n + 1 || p_fw.cols() != n || p_rv.rows() != n ||
      p_rv.cols() != n + 1)
    throw std::invalid_argument("probability/ground-truth shape mismatch");
  double total = 0.0, weight = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g(i, j) != 0.0) {
        const double p = std::max(p_fw(i, j), p_rv(i, j));
        total += g(i, j) * -std::log(std::max(p, detail::kProbClamp));
        weight += g(i, j);
      }
  if (weight == 0.0) throw std::invalid_argument("no ground-truth pairs");
  return total / weight;
}

struct LossReport {
  double l_fw = 0.0;
  double l_rv = 0.0;
  double l_nm = 0.0;
  double l_match = 0.0;
};

inline LossReport match_loss(double l_fw, double l_rv, double l_nm) {
  if (l_fw < 0 || l_rv < 0 || l_nm < 0) throw std::invalid_argument("losses must be non-negative");
  return LossReport{l_fw, l_rv, l_nm, (l_fw + l_rv + l_nm) / 3.0};
}

struct CombinedLossInput {
  double l_detseg_prev = 0.0;
  double l_detseg_cur = 0.0;
  double l_match = 0.0;
  double s_i = 0.0;
  double s_j = 0.0;
};

/// Uncertainty-weighted sum of the detection/segmentation and matching terms.
inline double combined_loss(const CombinedLossInput& in) {
  if (in.l_detseg_prev < 0 || in.l_detseg_cur < 0 || in.l_match < 0)
    throw std::invalid_argument("losses must be non-negative");
  return 0.5 * (std::exp(-in.s_i) * (in.l_detseg_prev + in.l_detseg_cur) + in.s_i +
                std::exp(-in.s_j) * in.l_match + in.s_j);
}

}  // namespace vistrack
