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

#include "avel/zeroshot.h"

#include <optional>

#include "avel/parallel.h"

namespace avel {

ZeroShotResult localize_with_scores(const SegmentEmbeddings& audio,
                                    const SegmentEmbeddings& visual, const Matrix& text,
                                    const ClassVocabulary& vocab) {
  audio.validate();
  visual.validate();
  if (text.rows() != vocab.size(Scope::kFull)) {
    throw ShapeError("text embeddings have " + std::to_string(text.rows()) +
                     " rows but the vocabulary has " + std::to_string(vocab.size(Scope::kFull)) +
                     " classes");
  }
  if (audio.segments() != visual.segments() || audio.dim() != visual.dim()) {
    throw ShapeError("audio and visual embeddings differ in shape");
  }
  ZeroShotResult result;
  result.audio_text = cosine_similarity_matrix(audio.data, text, SimilaritySource::kAudioText);
  result.visual_text = cosine_similarity_matrix(visual.data, text, SimilaritySource::kVisualText);

  auto audio_best = row_argmax(result.audio_text.scores);
  auto visual_best = row_argmax(result.visual_text.scores);
  const int background = vocab.special_index(Scope::kFull);
  result.prediction.classes.resize(audio_best.size());
  for (std::size_t t = 0; t < audio_best.size(); ++t) {
    bool agree = audio_best[t] == visual_best[t];
    result.prediction.classes[t] = agree ? audio_best[t] : background;
  }
  return result;
}

PredictionSequence localize(const SegmentEmbeddings& audio, const SegmentEmbeddings& visual,
                            const Matrix& text, const ClassVocabulary& vocab) {
  return localize_with_scores(audio, visual, text, vocab).prediction;
}

BatchOutcome batch_localize(const std::vector<VideoSample>& samples, const Matrix& text,
                            const ClassVocabulary& vocab, int jobs) {
  std::vector<std::optional<PredictionSequence>> slots(samples.size());
  std::vector<std::string> messages(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    try {
      auto prediction = localize(samples[i].audio, samples[i].visual, text, vocab);
      prediction.video_id = samples[i].video_id;
      slots[i] = std::move(prediction);
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  });

  BatchOutcome outcome;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i]) {
      outcome.predictions.push_back(std::move(*slots[i]));
    } else {
      outcome.errors.push_back({samples[i].video_id, messages[i]});
    }
  }
  return outcome;
}

}  // namespace avel
