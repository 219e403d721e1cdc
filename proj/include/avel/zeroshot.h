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

#ifndef AVEL_ZEROSHOT_H_
#define AVEL_ZEROSHOT_H_

#include <string>
#include <vector>

#include "avel/core.h"
#include "avel/similarity.h"

namespace avel {

// Audio and visual embeddings of one video.
struct VideoSample {
  std::string video_id;
  SegmentEmbeddings audio;
  SegmentEmbeddings visual;
};

struct ZeroShotResult {
  PredictionSequence prediction;
  SimilarityMatrix audio_text;
  SimilarityMatrix visual_text;
};

// Training-free localization. Each segment takes the audio and visual argmax
// classes over the text rows; matching non-special classes give an event,
// anything else is background. `text` holds one row per full-vocabulary index.
PredictionSequence localize(const SegmentEmbeddings& audio, const SegmentEmbeddings& visual,
                            const Matrix& text, const ClassVocabulary& vocab);

ZeroShotResult localize_with_scores(const SegmentEmbeddings& audio,
                                    const SegmentEmbeddings& visual, const Matrix& text,
                                    const ClassVocabulary& vocab);

struct SampleError {
  std::string video_id;
  std::string message;
};

struct BatchOutcome {
  std::vector<PredictionSequence> predictions;  // input order, failures skipped
  std::vector<SampleError> errors;
};

BatchOutcome batch_localize(const std::vector<VideoSample>& samples, const Matrix& text,
                            const ClassVocabulary& vocab, int jobs = 1);

}  // namespace avel

#endif  // AVEL_ZEROSHOT_H_
