#include "vistrack/embedding.hpp"

#include <gtest/gtest.h>

using namespace vistrack;

namespace {

FeatureMap constant_map(int channels, int h, int w, double stride, double base) {
  FeatureMap m;
  m.channels = channels;
  m.height = h;
  m.width = w;
  m.stride = stride;
  m.values.resize(static_cast<std::size_t>(channels) * h * w);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.at(c, y, x) = base + 2 * c;
  return m;
}

// Each cell holds a unique value so the sampled cell is identifiable.
FeatureMap cell_coded_map(int h, int w, double stride) {
  FeatureMap m;
  m.channels = 1;
  m.height = h;
  m.width = w;
  m.stride = stride;
  m.values.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(0, y, x) = 100.0 * y + x;
  return m;
}

}  // namespace

TEST(SampleEmbedding, ConstantMap) {
  FeatureMapStack stack;
  FeatureMap m = constant_map(2, 4, 4, 1.0, 5.0);
  m.values.assign(m.values.size(), 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      m.at(0, y, x) = 5.0;
      m.at(1, y, x) = 7.0;
    }
  stack.maps.push_back(m);
  const Eigen::VectorXd v = sample_embedding(stack, Centroid{1.3, 2.9}, 2);
  EXPECT_DOUBLE_EQ(v(0), 5.0);
  EXPECT_DOUBLE_EQ(v(1), 7.0);
}

TEST(SampleEmbedding, StrideFourPicksCell) {
  FeatureMapStack stack;
  stack.maps.push_back(cell_coded_map(4, 4, 4.0));
  const Eigen::VectorXd v = sample_embedding(stack, Centroid{8.0, 4.0}, 1);
  EXPECT_DOUBLE_EQ(v(0), 100.0 * 1 + 2);  // cell (2, 1)
}

TEST(SampleEmbedding, PiecewiseConstantWithinCell) {
  FeatureMapStack stack;
  stack.maps.push_back(cell_coded_map(6, 6, 4.0));
  const Eigen::VectorXd a = sample_embedding(stack, Centroid{8.0, 4.0}, 1);
  const Eigen::VectorXd b = sample_embedding(stack, Centroid{11.9, 7.9}, 1);
  const Eigen::VectorXd c = sample_embedding(stack, Centroid{12.0, 4.0}, 1);
  EXPECT_EQ(a(0), b(0));
  EXPECT_NE(a(0), c(0));
}

TEST(SampleEmbedding, ClampsToMapBounds) {
  FeatureMapStack stack;
  stack.maps.push_back(cell_coded_map(3, 3, 4.0));
  const Eigen::VectorXd v = sample_embedding(stack, Centroid{11.9, 11.9}, 1);
  EXPECT_DOUBLE_EQ(v(0), 100.0 * 2 + 2);
  const Eigen::VectorXd w = sample_embedding(stack, Centroid{100.0, 0.0}, 1);
  EXPECT_DOUBLE_EQ(w(0), 2.0);  // clamped to last column
}

TEST(SampleEmbedding, PaperProfileLengthIs352) {
  FeatureMapStack stack;
  for (int k = 0; k < 11; ++k) stack.maps.push_back(constant_map(32, 4, 4, 4.0, k));
  EXPECT_EQ(stack.total_channels(), 352);
  const Eigen::VectorXd v = sample_embedding(stack, Centroid{2.0, 2.0}, 352);
  EXPECT_EQ(v.size(), 352);
}

TEST(SampleEmbedding, ChannelSumMismatchThrows) {
  FeatureMapStack stack;
  stack.maps.push_back(constant_map(3, 2, 2, 1.0, 0.0));
  EXPECT_THROW(sample_embedding(stack, Centroid{0, 0}, 4), std::invalid_argument);
}

TEST(SampleEmbedding, NormIsConcatenationOfPerMapNorms) {
  FeatureMapStack stack;
  stack.maps.push_back(constant_map(2, 3, 3, 2.0, 1.0));
  stack.maps.push_back(constant_map(3, 2, 2, 4.0, 0.5));
  const Centroid c{3.0, 3.0};
  const Eigen::VectorXd v = sample_embedding(stack, c, 5);
  const double block0 = v.head(2).squaredNorm();
  const double block1 = v.tail(3).squaredNorm();
  EXPECT_DOUBLE_EQ(v.squaredNorm(), block0 + block1);
}

TEST(BuildEmbeddingMatrix, PadsWithZeros) {
  std::vector<Eigen::VectorXd> embs(3, Eigen::VectorXd::Constant(4, 1.0));
  const EmbeddingMatrix m = build_embedding_matrix(embs, 4, 5);
  EXPECT_EQ(m.count, 3);
  EXPECT_EQ(m.values.rows(), 4);
  EXPECT_EQ(m.values.cols(), 5);
  EXPECT_DOUBLE_EQ(m.values.col(3).norm(), 0.0);
  EXPECT_DOUBLE_EQ(m.values.col(4).norm(), 0.0);
}

TEST(BuildEmbeddingMatrix, EmptyInput) {
  const EmbeddingMatrix m = build_embedding_matrix({}, 4, 5);
  EXPECT_EQ(m.count, 0);
  EXPECT_DOUBLE_EQ(m.values.norm(), 0.0);
}

TEST(BuildEmbeddingMatrix, StrictOverflowThrows) {
  std::vector<Eigen::VectorXd> embs(6, Eigen::VectorXd::Zero(2));
  try {
    build_embedding_matrix(embs, 2, 5);
    FAIL() << "expected overflow";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "instance overflow");
  }
}

TEST(BuildEmbeddingMatrix, LenientKeepsHighestConfidence) {
  std::vector<Eigen::VectorXd> embs;
  for (int i = 0; i < 6; ++i) embs.push_back(Eigen::VectorXd::Constant(2, double(i)));
  const std::vector<double> conf{0.9, 0.1, 0.8, 0.2, 0.7, 0.95};
  const EmbeddingMatrix m =
      build_embedding_matrix(embs, 2, 4, OverflowMode::Lenient, conf);
  EXPECT_EQ(m.count, 4);
  // Kept detections (0, 2, 4, 5) stay in original order.
  EXPECT_DOUBLE_EQ(m.values(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(m.values(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.values(0, 2), 4.0);
  EXPECT_DOUBLE_EQ(m.values(0, 3), 5.0);
}

TEST(BuildEmbeddingMatrix, LengthMismatchThrows) {
  std::vector<Eigen::VectorXd> embs{Eigen::VectorXd::Zero(3)};
  EXPECT_THROW(build_embedding_matrix(embs, 4, 5), std::invalid_argument);
}

TEST(LenientKeepIndices, TiesKeepEarlier) {
  const std::vector<double> conf{0.5, 0.5, 0.5};
  EXPECT_EQ(lenient_keep_indices(conf, 2), (std::vector<int>{0, 1}));
}
