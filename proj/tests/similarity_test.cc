/*
 * Copyright 2026 The avel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "avel/core.h"
#include "avel/similarity.h"
#include "test_util.h"

namespace avel {
namespace {

TEST(L2Normalize, ThreeFourFive) {
  Matrix m(1, 2);
  m << 3, 4;
  Matrix n = l2_normalize_rows(m);
  EXPECT_NEAR(n(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(n(0, 1), 0.8, 1e-12);
}

TEST(L2Normalize, UnitRowUnchanged) {
  Matrix m(1, 3);
  m << 0.0, 0.6, -0.8;
  EXPECT_LT((l2_normalize_rows(m) - m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(L2Normalize, ZeroRowThrows) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  EXPECT_THROW(l2_normalize_rows(m), DegenerateEmbeddingError);
}

TEST(L2Normalize, BackwardMatchesFiniteDifference) {
  std::mt19937_64 rng(5);
  Matrix x = testing::random_matrix(3, 4, rng);
  Matrix g = testing::random_matrix(3, 4, rng);
  Matrix analytic = l2_normalize_rows_backward(x, l2_normalize_rows(x), g);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    double numeric = (l2_normalize_rows(xp) - l2_normalize_rows(xm)).cwiseProduct(g).sum() / (2 * h);
    EXPECT_NEAR(analytic.data()[i], numeric, 1e-7);
  }
}

TEST(Cosine, SelfAndOrthogonal) {
  Matrix f(2, 3), e(2, 3);
  f << 1, 2, 3,  //
      0, 0, 5;
  e << 2, 4, 6,  //
      1, 0, 0;
  auto s = cosine_similarity_matrix(f, e, SimilaritySource::kAudioText);
  EXPECT_NEAR(s.scores(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s.scores(1, 1), 0.0, 1e-12);
  EXPECT_EQ(s.source, SimilaritySource::kAudioText);
}

TEST(Cosine, DiagonalExample) {
  Matrix f(1, 2), e(2, 2);
  f << 1, 1;
  e << 1, 0,  //
      0, 1;
  auto s = cosine_similarity_matrix(f, e, SimilaritySource::kVisualText);
  EXPECT_NEAR(s.scores(0, 0), 0.7071, 1e-4);
  EXPECT_NEAR(s.scores(0, 1), 0.7071, 1e-4);
  EXPECT_NEAR(s.scores(0, 0), 1.0 / std::sqrt(2.0), 1e-6);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine_similarity_matrix(Matrix::Ones(2, 3), Matrix::Ones(2, 4),
                                        SimilaritySource::kAudioText),
               ShapeError);
  EXPECT_THROW(cosine_similarity_matrix(Matrix::Ones(2, 3), Matrix::Zero(1, 3),
                                        SimilaritySource::kAudioText),
               DegenerateEmbeddingError);
}

TEST(Cosine, TransposeSymmetry) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix f = testing::random_matrix(4, 6, rng);
    Matrix e = testing::random_matrix(5, 6, rng);
    Matrix a = cosine_similarity_matrix(f, e, SimilaritySource::kAudioText).scores;
    Matrix b = cosine_similarity_matrix(e, f, SimilaritySource::kAudioText).scores;
    EXPECT_LT((a - b.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Cosine, ArgmaxInvariantUnderRowScaling) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix f = testing::random_matrix(6, 8, rng);
    Matrix e = testing::random_matrix(7, 8, rng);
    auto base = row_argmax(cosine_similarity_matrix(f, e, SimilaritySource::kAudioText).scores);
    for (Eigen::Index r = 0; r < f.rows(); ++r) f.row(r) *= scale(rng);
    for (Eigen::Index r = 0; r < e.rows(); ++r) e.row(r) *= scale(rng);
    EXPECT_EQ(row_argmax(cosine_similarity_matrix(f, e, SimilaritySource::kAudioText).scores), base);
  }
}

TEST(Softmax, UniformRow) {
  Matrix s = Matrix::Constant(1, 4, 0.3);
  Matrix p = softmax_rows(s, 0.07);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(p(0, k), 0.25, 1e-12);
}

TEST(Softmax, TwoClassExample) {
  Matrix s(1, 2);
  s << 1, 0;
  Matrix p = softmax_rows(s, 1.0);
  EXPECT_NEAR(p(0, 0), 0.7311, 1e-4);
  EXPECT_NEAR(p(0, 1), 0.2689, 1e-4);
  EXPECT_NEAR(p(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
}

TEST(Softmax, SmallTemperatureConcentrates) {
  Matrix s(1, 3);
  s << 0.2, 0.5, 0.49;
  Matrix p = softmax_rows(s, 1e-4);
  EXPECT_NEAR(p(0, 1), 1.0, 1e-12);
  EXPECT_TRUE(p.allFinite());
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(softmax_rows(Matrix::Ones(1, 2), 0.0), Error);
  EXPECT_THROW(softmax_rows(Matrix::Ones(1, 2), -1.0), Error);
}

TEST(Softmax, RowsStochasticAndArgmaxPreserved) {
  std::mt19937_64 rng(13);
  for (double tau : {1e-3, 0.07, 1.0, 50.0}) {
    Matrix s = testing::random_matrix(8, 9, rng);
    Matrix p = softmax_rows(s, tau);
    for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_EQ(row_argmax(p), row_argmax(s));
  }
}

TEST(Softmax, BackwardMatchesFiniteDifference) {
  std::mt19937_64 rng(14);
  Matrix s = testing::random_matrix(3, 5, rng);
  Matrix g = testing::random_matrix(3, 5, rng);
  const double tau = 0.3;
  Matrix analytic = softmax_rows_backward(softmax_rows(s, tau), g, tau);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    Matrix sp = s, sm = s;
    sp.data()[i] += h;
    sm.data()[i] -= h;
    double numeric = (softmax_rows(sp, tau) - softmax_rows(sm, tau)).cwiseProduct(g).sum() / (2 * h);
    EXPECT_NEAR(analytic.data()[i], numeric, 1e-7);
  }
}

}  // namespace
}  // namespace avel
