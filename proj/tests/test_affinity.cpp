#include "vistrack/affinity.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vistrack;

namespace {

EmbeddingMatrix matrix_from_columns(const std::vector<Eigen::VectorXd>& cols, int n_m) {
  return build_embedding_matrix(cols, cols.empty() ? 0 : static_cast<int>(cols[0].size()), n_m);
}

// Direct transcription of the masked negative-log-likelihood sum.
double loss_transcription(const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j) {
      num += g(i, j) * -std::log(std::max(p(i, j), 1e-12));
      den += g(i, j);
    }
  return num / den;
}

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// Random row-stochastic-ish probabilities via softmax of the raw matrix.
Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd p = m;
  for (int j = 0; j < p.cols(); ++j) {
    p.col(j) = (p.col(j).array() - p.col(j).maxCoeff()).exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

}  // namespace

TEST(AffinityScores, CosineBasics) {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  const EmbeddingMatrix prev = matrix_from_columns({a, b}, 3);
  const EmbeddingMatrix cur = matrix_from_columns({a, b}, 3);
  const Eigen::MatrixXd s = affinity_scores(cur, prev);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s(1, 1), 1.0);
  // Padded column pairs score zero by the padding rule.
  EXPECT_DOUBLE_EQ(s(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(s(0, 2), 0.0);
}

TEST(AffinityScores, DimensionMismatchThrows) {
  const EmbeddingMatrix a = matrix_from_columns({Eigen::VectorXd::Ones(2)}, 3);
  const EmbeddingMatrix b = matrix_from_columns({Eigen::VectorXd::Ones(3)}, 3);
  EXPECT_THROW(affinity_scores(a, b), std::invalid_argument);
}

TEST(AffinityScores, NegSquaredEuclidean) {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  EXPECT_DOUBLE_EQ(neg_squared_euclidean_scorer(a, b), -2.0);
  EXPECT_DOUBLE_EQ(neg_squared_euclidean_scorer(a, a), 0.0);
}

TEST(PadDynamic, AppendsGammaRowAndColumn) {
  const Eigen::MatrixXd t = Eigen::MatrixXd::Identity(2, 2);
  const auto [m_fw, m_rv] = pad_dynamic(t, 0.3);
  ASSERT_EQ(m_fw.rows(), 3);
  ASSERT_EQ(m_fw.cols(), 2);
  ASSERT_EQ(m_rv.rows(), 2);
  ASSERT_EQ(m_rv.cols(), 3);
  EXPECT_DOUBLE_EQ(m_fw(2, 0), 0.3);
  EXPECT_DOUBLE_EQ(m_fw(2, 1), 0.3);
  EXPECT_DOUBLE_EQ(m_rv(0, 2), 0.3);
  EXPECT_DOUBLE_EQ(m_rv(1, 2), 0.3);
  EXPECT_TRUE(m_fw.topRows(2).isApprox(t));
  EXPECT_TRUE(m_rv.leftCols(2).isApprox(t));

  const auto [z_fw, z_rv] = pad_dynamic(Eigen::MatrixXd::Zero(2, 2), 0.0);
  EXPECT_DOUBLE_EQ(z_fw.row(2).sum(), 0.0);
  EXPECT_DOUBLE_EQ(z_rv.col(2).sum(), 0.0);
}

TEST(Normalize, UniformColumn) {
  Eigen::MatrixXd m_fw = Eigen::MatrixXd::Zero(3, 1);
  Eigen::MatrixXd m_rv = Eigen::MatrixXd::Zero(1, 3);
  const auto [p_fw, p_rv] = normalize(m_fw, m_rv);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p_fw(i, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(p_rv(0, i), 1.0 / 3.0, 1e-15);
  }
}

TEST(Normalize, AnalyticColumn) {
  Eigen::MatrixXd m_fw(3, 1);
  m_fw << std::log(2.0), 0.0, 0.0;
  const auto [p_fw, p_rv] = normalize(m_fw, Eigen::MatrixXd::Zero(1, 3));
  EXPECT_NEAR(p_fw(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p_fw(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(p_fw(2, 0), 0.25, 1e-15);
}

TEST(Normalize, StochasticOnExtremeInputs) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd raw = random_matrix(5, 5, rng, -50.0, 50.0);
    const auto [m_fw, m_rv] = pad_dynamic(raw, -50.0 + 100.0 * (trial % 2));
    const auto [p_fw, p_rv] = normalize(m_fw, m_rv);
    ASSERT_TRUE(p_fw.allFinite());
    ASSERT_TRUE(p_rv.allFinite());
    for (int j = 0; j < p_fw.cols(); ++j) ASSERT_NEAR(p_fw.col(j).sum(), 1.0, 1e-9);
    for (int i = 0; i < p_rv.rows(); ++i) ASSERT_NEAR(p_rv.row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(p_fw.minCoeff(), 0.0);
    EXPECT_LE(p_fw.maxCoeff(), 1.0);
  }
}

TEST(Normalize, ColumnShiftInvariance) {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd raw = random_matrix(4, 4, rng, -5.0, 5.0);
    const auto [m_fw, m_rv] = pad_dynamic(raw, 0.2);
    Eigen::MatrixXd shifted = m_fw;
    shifted.col(2).array() += 13.7;
    const auto [p_a, p_rv_a] = normalize(m_fw, m_rv);
    const auto [p_b, p_rv_b] = normalize(shifted, m_rv);
    EXPECT_LT((p_a.col(2) - p_b.col(2)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(GroundTruth, PaddedForms) {
  // 3 previous instances, 2 current; only pair (0, 1) persists.
  const GroundTruthAssociation gt = make_ground_truth(4, {{0, 1}}, 3, 2);
  EXPECT_DOUBLE_EQ(gt.g(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(gt.g.sum(), 1.0);
  // Unmatched current detection 0 enters.
  EXPECT_DOUBLE_EQ(gt.g_fw(4, 0), 1.0);
  EXPECT_DOUBLE_EQ(gt.g_fw(4, 1), 0.0);
  EXPECT_DOUBLE_EQ(gt.g_fw.col(0).sum(), 1.0);
  // Unmatched previous instances 1 and 2 leave.
  EXPECT_DOUBLE_EQ(gt.g_rv(1, 4), 1.0);
  EXPECT_DOUBLE_EQ(gt.g_rv(2, 4), 1.0);
  EXPECT_DOUBLE_EQ(gt.g_rv(0, 4), 0.0);
  // Padded columns and rows carry no ground truth.
  EXPECT_DOUBLE_EQ(gt.g_fw.col(2).sum(), 0.0);
  EXPECT_DOUBLE_EQ(gt.g_rv.row(3).sum(), 0.0);
}

TEST(GroundTruth, RejectsDuplicates) {
  EXPECT_THROW(make_ground_truth(3, {{0, 0}, {0, 1}}, 2, 2), std::invalid_argument);
  EXPECT_THROW(make_ground_truth(3, {{0, 0}, {1, 0}}, 2, 2), std::invalid_argument);
  EXPECT_THROW(make_ground_truth(3, {{2, 0}}, 2, 2), std::invalid_argument);
}

TEST(ForwardLoss, PerfectOneHotIsZero) {
  const GroundTruthAssociation gt = make_ground_truth(2, {{0, 0}, {1, 1}}, 2, 2);
  EXPECT_DOUBLE_EQ(forward_loss(gt.g_fw, gt.g_fw), 0.0);
  EXPECT_DOUBLE_EQ(reverse_loss(gt.g_rv, gt.g_rv), 0.0);
}

TEST(ForwardLoss, UniformIsLogThree) {
  const GroundTruthAssociation gt = make_ground_truth(2, {{0, 0}, {1, 1}}, 2, 2);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(3, 2, 1.0 / 3.0);
  EXPECT_NEAR(forward_loss(p, gt.g_fw), std::log(3.0), 1e-12);
}

TEST(ForwardLoss, AllZeroGroundTruthThrows) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(3, 2, 1.0 / 3.0);
  EXPECT_THROW(forward_loss(p, Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
}

TEST(ForwardLoss, MatchesTranscriptionOracle) {
  std::mt19937 rng(47);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::MatrixXd p = column_softmax(random_matrix(4, 3, rng, -3.0, 3.0));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 3);
    for (int j = 0; j < 3; ++j) g(coin(rng) * 2 + coin(rng), j) = 1.0;
    EXPECT_NEAR(forward_loss(p, g), loss_transcription(p, g), 1e-12);
  }
}

TEST(ForwardLoss, MonotoneInGroundTruthProbability) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd p = column_softmax(random_matrix(4, 3, rng, -2.0, 2.0));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 3);
    g(1, 0) = 1.0;
    g(2, 1) = 1.0;
    const double before = forward_loss(p, g);
    // Boost one ground-truth entry, renormalize its column.
    p(1, 0) *= 1.5;
    p.col(0) /= p.col(0).sum();
    EXPECT_LE(forward_loss(p, g), before + 1e-12);
  }
}

TEST(NonmaxLoss, PerfectAndUniform) {
  const GroundTruthAssociation gt = make_ground_truth(2, {{0, 0}, {1, 1}}, 2, 2);
  Eigen::MatrixXd p_fw = Eigen::MatrixXd::Zero(3, 2);
  Eigen::MatrixXd p_rv = Eigen::MatrixXd::Zero(2, 3);
  p_fw.topRows(2) = gt.g;
  p_rv.leftCols(2) = gt.g;
  EXPECT_DOUBLE_EQ(nonmax_loss(p_fw, p_rv, gt.g), 0.0);

  const Eigen::MatrixXd u_fw = Eigen::MatrixXd::Constant(3, 2, 1.0 / 3.0);
  const Eigen::MatrixXd u_rv = Eigen::MatrixXd::Constant(2, 3, 1.0 / 3.0);
  EXPECT_NEAR(nonmax_loss(u_fw, u_rv, gt.g), std::log(3.0), 1e-12);
}

TEST(NonmaxLoss, MatchesElementwiseMaxOracle) {
  std::mt19937 rng(59);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::MatrixXd raw = random_matrix(3, 3, rng, -3.0, 3.0);
    const auto [m_fw, m_rv] = pad_dynamic(raw, 0.1);
    const auto [p_fw, p_rv] = normalize(m_fw, m_rv);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
    g(0, 1) = 1.0;
    g(2, 0) = 1.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (g(i, j) != 0.0) {
          num += -std::log(std::max(std::max(p_fw(i, j), p_rv(i, j)), 1e-12));
          den += 1.0;
        }
    EXPECT_NEAR(nonmax_loss(p_fw, p_rv, g), num / den, 1e-12);
  }
}

TEST(MatchLoss, ExactAverage) {
  EXPECT_DOUBLE_EQ(match_loss(0, 0, 0).l_match, 0.0);
  EXPECT_DOUBLE_EQ(match_loss(3, 3, 3).l_match, 3.0);
  EXPECT_DOUBLE_EQ(match_loss(1, 2, 6).l_match, 3.0);
  const LossReport r = match_loss(0.7, 1.3, 2.9);
  EXPECT_DOUBLE_EQ(r.l_match, (0.7 + 1.3 + 2.9) / 3.0);
}

TEST(CombinedLoss, Examples) {
  EXPECT_DOUBLE_EQ(combined_loss({0, 0, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(combined_loss({1, 1, 2, 0, 0}), 2.0);
}

TEST(CombinedLoss, MatchesTranscriptionOracle) {
  std::mt19937 rng(61);
  std::uniform_real_distribution<double> pos(0.0, 5.0), any(-2.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const CombinedLossInput in{pos(rng), pos(rng), pos(rng), any(rng), any(rng)};
    const double expect = 0.5 * ((1.0 / std::exp(in.s_i)) * (in.l_detseg_prev + in.l_detseg_cur) +
                                 in.s_i + (1.0 / std::exp(in.s_j)) * in.l_match + in.s_j);
    EXPECT_NEAR(combined_loss(in), expect, 1e-12);
  }
}

TEST(ComputeAffinity, InvariantShapes) {
  std::mt19937 rng(67);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::VectorXd> cols;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd v(4);
    for (int k = 0; k < 4; ++k) v(k) = u(rng);
    cols.push_back(v.normalized());
  }
  const EmbeddingMatrix cur = matrix_from_columns(cols, 5);
  const EmbeddingMatrix prev = matrix_from_columns({cols[2], cols[0]}, 5);
  const AffinityResult r = compute_affinity(cur, prev, 0.2);
  EXPECT_TRUE(r.m_fw.topRows(5).isApprox(r.t_prime));
  EXPECT_TRUE(r.m_rv.leftCols(5).isApprox(r.t_prime));
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(r.p_fw.col(j).sum(), 1.0, 1e-9);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.p_rv.row(i).sum(), 1.0, 1e-9);
}
