// Copyright 2026 The Colearn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "colearn/classifier_branch.hpp"

#include <cstring>

#include "colearn/feature_bank.hpp"
#include "oracle/ncc_oracle.hpp"
#include "test_support.hpp"

namespace colearn {
namespace {

using testing::rows;

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

TEST(WeightedCentroids, OneHotGivesClassMeans) {
  const Centroids c = weighted_centroids(rows({{1, 0}, {0, 1}}), ProbMatrix::one_hot(LabelVector{0, 1}, 2));
  EXPECT_TRUE(c.mu.isApprox(rows({{1, 0}, {0, 1}})));
  EXPECT_TRUE(c.valid[0] && c.valid[1]);
}

TEST(WeightedCentroids, SoftWeights) {
  const Centroids c =
      weighted_centroids(rows({{1, 0}, {0, 1}}), ProbMatrix::from_matrix(rows({{0.9, 0.1}, {0.1, 0.9}})));
  EXPECT_NEAR(c.mu(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(c.mu(0, 1), 0.1, 1e-12);
  EXPECT_NEAR(c.mass(0), 1.0, 1e-12);
}

TEST(WeightedCentroids, EmptyClassFallsBackToGlobalMean) {
  const Matrix x = rows({{3, 4}, {0, 2}});
  const Centroids c = weighted_centroids(x, ProbMatrix::from_matrix(rows({{1, 0, 0}, {0, 1, 0}})));
  EXPECT_FALSE(c.valid[2]);
  EXPECT_NEAR(c.mu(2, 0), 0.3, 1e-12);
  EXPECT_NEAR(c.mu(2, 1), 0.9, 1e-12);
  EXPECT_DOUBLE_EQ(c.mass(2), 0.0);
}

TEST(WeightedCentroids, OneHotMatchesPerClassMeansOfNormalizedFeatures) {
  std::mt19937_64 rng(2);
  const Matrix x = testing::random_matrix(30, 4, rng);
  LabelVector y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 3;
  const Centroids c = weighted_centroids(x, ProbMatrix::one_hot(y, 3));
  const Matrix xn = l2_normalize_rows(x);
  for (int k = 0; k < 3; ++k) {
    Vector mean = Vector::Zero(4);
    for (int i = k; i < 30; i += 3) mean += xn.row(i).transpose() / 10.0;
    EXPECT_LT((c.mu.row(k).transpose() - mean).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(WeightedCentroids, ShapeMismatchThrows) {
  EXPECT_COLEARN_ERROR(weighted_centroids(rows({{1, 0}}), ProbMatrix::uniform(2, 2)), ErrorCode::DimensionMismatch);
}

TEST(CosineLogits, OrthonormalCase) {
  const Centroids c = weighted_centroids(rows({{1, 0}, {0, 1}}), ProbMatrix::one_hot(LabelVector{0, 1}, 2));
  const Matrix g = cosine_logits(rows({{1, 0}}), c);
  EXPECT_DOUBLE_EQ(g(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g(0, 1), 0.0);
}

TEST(CosineLogits, HandCosine) {
  const Centroids c =
      weighted_centroids(rows({{1, 0}, {0, 1}}), ProbMatrix::from_matrix(rows({{0.9, 0.1}, {0.1, 0.9}})));
  EXPECT_NEAR(cosine_logits(rows({{1, 0}}), c)(0, 0), 0.99388, 1e-5);
  EXPECT_NEAR(cosine_logits(rows({{1, 0}}), c)(0, 0), 0.9 / std::sqrt(0.82), 1e-12);
}

TEST(CosineLogits, ScaleInvariant) {
  const Centroids c = weighted_centroids(rows({{1, 0.5}, {-0.2, 1}}), ProbMatrix::one_hot(LabelVector{0, 1}, 2));
  EXPECT_TRUE(bit_equal(cosine_logits(rows({{2, 0}}), c), cosine_logits(rows({{1, 0}}), c)));
}

TEST(CosineLogits, InvalidClassGetsMinimumAndZeroRowGetsZeros) {
  const Centroids c = weighted_centroids(rows({{1, 0}, {0, 1}}), ProbMatrix::one_hot(LabelVector{0, 0}, 2));
  const Matrix g = cosine_logits(rows({{0, 1}, {0, 0}}), c);
  EXPECT_EQ(g(0, 1), -1.0);
  EXPECT_EQ(g(1, 0), 0.0);
  EXPECT_EQ(g(1, 1), 0.0);
}

TEST(CosineLogits, BoundedAndScaleArgmaxInvariant) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = testing::random_matrix(25, 5, rng);
    const ProbMatrix w = softmax_with_temperature(testing::random_matrix(25, 4, rng), 0.5);
    const Matrix g = cosine_logits(x, weighted_centroids(x, w));
    EXPECT_LE(g.maxCoeff(), 1.0);
    EXPECT_GE(g.minCoeff(), -1.0);
    const Matrix gs = cosine_logits(7.5 * x, weighted_centroids(7.5 * x, w));
    for (Eigen::Index i = 0; i < g.rows(); ++i) EXPECT_EQ(argmax(g.row(i)), argmax(gs.row(i)));
  }
}

TEST(Softmax, SaturatesAtDefaultTemperature) {
  EXPECT_GT(softmax_with_temperature(rows({{1, -1}}), kCentroidTemperature)(0, 0), 1 - 1e-6);
}

TEST(Softmax, EqualLogitsGiveUniform) {
  for (double t : {0.01, 1.0, 50.0}) {
    const ProbMatrix p = softmax_with_temperature(rows({{2, 2, 2}}), t);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(p(0, j), 1.0 / 3, 1e-12);
  }
}

TEST(Softmax, SigmoidValue) {
  const ProbMatrix p = softmax_with_temperature(rows({{1, 0}}), 1.0);
  EXPECT_NEAR(p(0, 0), 0.73106, 1e-5);
  EXPECT_NEAR(p(0, 1), 0.26894, 1e-5);
}

TEST(Softmax, NonPositiveTemperatureThrows) {
  EXPECT_COLEARN_ERROR(softmax_with_temperature(rows({{1, 0}}), 0.0), ErrorCode::InvalidArgument);
}

TEST(Softmax, LowerTemperatureSharpens) {
  const Matrix g = rows({{0.3, -0.1, 0.2}});
  double previous = 0.0;
  for (double t : {10.0, 1.0, 0.5, 0.1, 0.05, 0.02}) {
    const double m = softmax_with_temperature(g, t).confidence(0);
    EXPECT_GT(m, previous);
    previous = m;
  }
}

TEST(Softmax, RowsSumToOneEvenForHugeLogits) {
  const ProbMatrix p = softmax_with_temperature(rows({{1e6, -1e6, 3}}), 0.01);
  EXPECT_NEAR(p.values().row(0).sum(), 1.0, 1e-12);
  EXPECT_EQ(p.prediction(0), 0);
}

TEST(ProbMatrix, RejectsNonStochasticRows) {
  EXPECT_COLEARN_ERROR(ProbMatrix::from_matrix(rows({{0.5, 0.6}})), ErrorCode::InvalidArgument);
  EXPECT_COLEARN_ERROR(ProbMatrix::from_matrix(rows({{1.5, -0.5}})), ErrorCode::InvalidArgument);
}

TEST(ProbMatrix, TiesGoToLowestIndex) {
  EXPECT_EQ(ProbMatrix::from_matrix(rows({{0.25, 0.375, 0.375}})).prediction(0), 1);
  EXPECT_EQ(ProbMatrix::uniform(1, 4).prediction(0), 0);
}

TEST(ZeroShot, TwoTemplateMeanIsNotRenormalized) {
  const Centroids c = zero_shot_centroids(std::vector<Matrix>{rows({{1, 0}, {0, 1}})});
  EXPECT_DOUBLE_EQ(c.mu(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.mu(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(c.mass(0), 2.0);
}

TEST(ZeroShot, SingleTemplateIsNormalized) {
  const Centroids c = zero_shot_centroids(std::vector<Matrix>{rows({{3, 4}})});
  EXPECT_DOUBLE_EQ(c.mu(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(c.mu(0, 1), 0.8);
}

TEST(ZeroShot, DuplicatedTemplates) {
  Matrix t(180, 3);
  for (int i = 0; i < 180; ++i) t.row(i) << 2, -1, 2;
  const Centroids c = zero_shot_centroids(std::vector<Matrix>{t});
  EXPECT_LT((c.mu.row(0) - rows({{2.0 / 3, -1.0 / 3, 2.0 / 3}})).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(c.mass(0), 180.0);
}

TEST(ZeroShot, ClassWithoutTemplatesThrows) {
  EXPECT_COLEARN_ERROR(zero_shot_centroids(std::vector<Matrix>{rows({{1, 0}}), Matrix(0, 2)}),
                       ErrorCode::MissingTemplates);
}

TEST(ZeroShot, ProbsOnCentroid) {
  const Centroids c = zero_shot_centroids(std::vector<Matrix>{rows({{1, 0}}), rows({{0, 1}})});
  const ProbMatrix p = zero_shot_probs(rows({{1, 0}}), c, kWeakZeroShotTemperature);
  EXPECT_EQ(p.prediction(0), 0);
  EXPECT_GT(p(0, 0), 0.99);
  EXPECT_NEAR(p(0, 0), std::exp(20.0) / (std::exp(20.0) + 1.0), 1e-12);
}

TEST(ZeroShot, IdenticalCentroidsGiveUniformProbs) {
  const Centroids c = zero_shot_centroids(std::vector<Matrix>{rows({{1, 2}}), rows({{1, 2}}), rows({{1, 2}})});
  const ProbMatrix p = zero_shot_probs(rows({{0.3, -2}, {5, 1}}), c, 0.05);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(p(i, j), 1.0 / 3, 1e-12);
}

TEST(FusedCentroids, MatchingOneHotsReduceToWeightedCentroids) {
  std::mt19937_64 rng(5);
  const Matrix x = testing::random_matrix(12, 3, rng);
  LabelVector y(12);
  for (int i = 0; i < 12; ++i) y[i] = i % 3;
  const ProbMatrix oh = ProbMatrix::one_hot(y, 3);
  EXPECT_TRUE(bit_equal(fused_centroids(x, oh, oh).mu, weighted_centroids(x, oh).mu));
}

TEST(FusedCentroids, UniformZeroShotCancels) {
  std::mt19937_64 rng(6);
  const Matrix x = testing::random_matrix(20, 4, rng);
  const ProbMatrix pa = softmax_with_temperature(testing::random_matrix(20, 5, rng), 1.0);
  const Centroids f = fused_centroids(x, pa, ProbMatrix::uniform(20, 5));
  const Centroids w = weighted_centroids(x, pa);
  EXPECT_LT((f.mu - w.mu).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((f.mass * 5.0 - w.mass).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FusedCentroids, DisagreeingOneHotsInvalidate) {
  const Matrix x = rows({{1, 0}, {0, 1}});
  const Centroids f = fused_centroids(x, ProbMatrix::one_hot(LabelVector{0, 1}, 2),
                                      ProbMatrix::one_hot(LabelVector{1, 0}, 2));
  EXPECT_FALSE(f.valid[0]);
  EXPECT_FALSE(f.valid[1]);
  EXPECT_DOUBLE_EQ(f.mu(0, 0), 0.5);
}

TEST(FusedLogits, AlphaOneIsCosineExactlyAndIgnoresZeroShot) {
  std::mt19937_64 rng(7);
  const Matrix x = testing::random_matrix(15, 3, rng);
  const Centroids c = weighted_centroids(x, softmax_with_temperature(testing::random_matrix(15, 4, rng), 1.0));
  const Matrix a = fused_logits(x, c, testing::random_matrix(15, 4, rng), GuidanceMode::weak());
  Matrix nan_zs = Matrix::Constant(15, 4, std::numeric_limits<double>::quiet_NaN());
  const Matrix b = fused_logits(x, c, nan_zs, GuidanceMode::weak());
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_TRUE(bit_equal(a, cosine_logits(x, c)));
}

TEST(FusedLogits, AlphaZeroIsTwentyTimesZeroShot) {
  std::mt19937_64 rng(8);
  const Matrix x = testing::random_matrix(10, 3, rng);
  const Matrix g = testing::random_matrix(10, 2, rng);
  const Centroids c = weighted_centroids(x, ProbMatrix::uniform(10, 2));
  const Matrix out = fused_logits(x, c, g, GuidanceMode{GuidanceKind::Strong, 0.0, 0.05});
  EXPECT_TRUE(bit_equal(out, Matrix(20.0 * g)));
}

TEST(FusedLogits, UnresolvedAutoThrows) {
  const Matrix x = rows({{1, 0}});
  const Centroids c = weighted_centroids(x, ProbMatrix::uniform(1, 2));
  EXPECT_COLEARN_ERROR(fused_logits(x, c, rows({{0.1, 0.2}}), GuidanceMode::strong()),
                       ErrorCode::UnresolvedTemperature);
}

TEST(FusedLogits, StrongAutoBalancesAddends) {
  std::mt19937_64 rng(9);
  Matrix g_cos = testing::random_matrix(200, 4, rng);
  g_cos *= 0.1 / population_std(g_cos);
  Matrix g_zs = testing::random_matrix(200, 4, rng);
  g_zs *= 0.2 / population_std(g_zs);
  const double t = resolve_strong_t_tilde(g_zs, g_cos);
  EXPECT_NEAR(t, 2.0, 1e-12);
  EXPECT_NEAR(population_std(g_zs / t), 0.1, 1e-12);
  EXPECT_NEAR(population_std(g_cos), 0.1, 1e-12);
}

TEST(StrongTemperature, ScalingAndIdentity) {
  std::mt19937_64 rng(10);
  const Matrix g = testing::random_matrix(30, 3, rng);
  EXPECT_NEAR(resolve_strong_t_tilde(2.0 * g, g), 2.0, 1e-12);
  EXPECT_NEAR(resolve_strong_t_tilde(g, g), 1.0, 1e-15);
  EXPECT_COLEARN_ERROR(resolve_strong_t_tilde(g, Matrix::Constant(30, 3, 0.4)), ErrorCode::DegenerateLogits);
}

TEST(BruteForce, MatchesDirectTranscription) {
  std::mt19937_64 rng(12);
  for (int inst = 0; inst < 60; ++inst) {
    const int n = 1 + static_cast<int>(rng() % 64), d = 1 + static_cast<int>(rng() % 8),
              l = 1 + static_cast<int>(rng() % 5);
    const Matrix x = testing::random_matrix(n, d, rng);
    const ProbMatrix pa = softmax_with_temperature(testing::random_matrix(n, l, rng, 2.0), 1.0);
    oracle::Rows xr(n, std::vector<double>(d)), par(n, std::vector<double>(l));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) xr[i][k] = x(i, k);
      for (int k = 0; k < l; ++k) par[i][k] = pa(i, k);
    }
    const Matrix g = cosine_logits(x, weighted_centroids(x, pa));
    const auto ref = oracle::cosine(xr, oracle::centroids(xr, par));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < l; ++k) ASSERT_NEAR(g(i, k), ref[i][k], 1e-5);
  }
}

}  // namespace
}  // namespace colearn
