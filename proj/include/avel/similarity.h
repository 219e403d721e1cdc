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

#ifndef AVEL_SIMILARITY_H_
#define AVEL_SIMILARITY_H_

#include "avel/core.h"

namespace avel {

inline constexpr double kMinRowNorm = 1e-12;
inline constexpr double kDefaultTemperature = 0.07;

// An embedding row whose norm is (numerically) zero; usually an upstream
// extraction failure.
class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

enum class SimilaritySource { kAudioText, kVisualText, kFusedText };

struct SimilarityMatrix {
  Matrix scores;  // T x K cosine similarities
  SimilaritySource source = SimilaritySource::kAudioText;
};

Matrix l2_normalize_rows(const Matrix& m);

// Gradient of l2_normalize_rows with respect to its input, given the
// forward input, the normalized output and the upstream gradient.
Matrix l2_normalize_rows_backward(const Matrix& input, const Matrix& normalized,
                                  const Matrix& grad_normalized);

// out(t, k) = <F_t, E_k> / (|F_t| |E_k|).
SimilarityMatrix cosine_similarity_matrix(const Matrix& features, const Matrix& text,
                                          SimilaritySource source = SimilaritySource::kAudioText);

// Row softmax of scores / temperature, max-subtracted.
Matrix softmax_rows(const Matrix& scores, double temperature);

// Gradient with respect to `scores` of softmax_rows(scores, temperature).
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs, double temperature);

}  // namespace avel

#endif  // AVEL_SIMILARITY_H_
