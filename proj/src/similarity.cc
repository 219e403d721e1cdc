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

#include "avel/similarity.h"

#include <cmath>
#include <string>

namespace avel {

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double norm = m.row(r).norm();
    if (!(norm > kMinRowNorm)) {
      throw DegenerateEmbeddingError("row " + std::to_string(r) +
                                     " has zero norm and cannot be normalized");
    }
    out.row(r) = m.row(r) / norm;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const Matrix& input, const Matrix& normalized,
                                  const Matrix& grad_normalized) {
  Matrix grad(input.rows(), input.cols());
  for (Eigen::Index r = 0; r < input.rows(); ++r) {
    double norm = input.row(r).norm();
    double along = normalized.row(r).dot(grad_normalized.row(r));
    grad.row(r) = (grad_normalized.row(r) - along * normalized.row(r)) / norm;
  }
  return grad;
}

SimilarityMatrix cosine_similarity_matrix(const Matrix& features, const Matrix& text,
                                          SimilaritySource source) {
  if (features.cols() != text.cols()) {
    throw ShapeError("embedding width " + std::to_string(features.cols()) +
                     " does not match text width " + std::to_string(text.cols()));
  }
  SimilarityMatrix out;
  out.source = source;
  out.scores = l2_normalize_rows(features) * l2_normalize_rows(text).transpose();
  return out;
}

Matrix softmax_rows(const Matrix& scores, double temperature) {
  if (!(temperature > 0.0)) throw Error("softmax temperature must be positive");
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double peak = scores.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      out(r, c) = std::exp((scores(r, c) - peak) / temperature);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs, double temperature) {
  Matrix grad(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double inner = probs.row(r).dot(grad_probs.row(r));
    grad.row(r) = probs.row(r).cwiseProduct(grad_probs.row(r).array().matrix() -
                                            RowVector::Constant(probs.cols(), inner)) /
                  temperature;
  }
  return grad;
}

}  // namespace avel
