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

#ifndef AVEL_TRAINER_H_
#define AVEL_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avel/core.h"
#include "avel/similarity.h"
#include "avel/temporal_model.h"
#include "avel/zeroshot.h"

namespace avel {

// How audio and visual class probabilities become one distribution.
//   kSqrt     sqrt(p_a * p_v) element-wise, rows renormalized to sum 1
//   kProbAvg  (p_a + p_v) / 2
//   kFeaAvg   features averaged before similarity; fuse() passes p_a through
enum class FusionMode { kSqrt, kProbAvg, kFeaAvg };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

struct TrainConfig {
  int batch_size = 32;
  int epochs = 5;
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  FusionMode fusion = FusionMode::kSqrt;
  double temperature = kDefaultTemperature;
  bool learn_temperature = false;
  double data_ratio = 1.0;  // per-class fraction of training videos
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

// Temporal encoder plus the softmax temperature that turns similarities
// into class probabilities.
struct FineTunedModel {
  TemporalEncoderConfig config;
  TemporalEncoderParams params;
  double temperature = kDefaultTemperature;
};

FineTunedModel make_model(const TemporalEncoderConfig& config, std::uint64_t seed,
                          InitScheme scheme = InitScheme::kResidualZero,
                          double temperature = kDefaultTemperature);

// Rows of a zero-overlap sqrt fusion (no class with mass in both inputs)
// fall back to uniform.
Matrix fuse(const Matrix& audio_probs, const Matrix& visual_probs, FusionMode mode);

// Mean over segments of -log fused[t][target_t], log clamped at 1e-12.
// `fused` rows must sum to 1 within 1e-6; `target` rows must be one-hot.
double cross_entropy(const Matrix& fused, const Matrix& target);

// T x K fused class probabilities of one video against `text` (K rows).
Matrix fused_probabilities(const FineTunedModel& model, const Matrix& audio,
                           const Matrix& visual, const Matrix& text, FusionMode mode);

struct LossGradients {
  TemporalEncoderParams params;
  double log_temperature = 0.0;  // dLoss / d(log temperature)
};

// Loss of one video and, when `grads` is non-null, its gradient accumulated
// into `grads` (which must be shaped like model.params).
double loss_and_gradients(const FineTunedModel& model, const Matrix& audio, const Matrix& visual,
                          const Matrix& text, const Matrix& target, FusionMode mode,
                          LossGradients* grads);

struct LabeledSample {
  VideoSample sample;
  LabelSequence label;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  std::optional<double> val_avg;
};

struct FitResult {
  FineTunedModel model;             // best epoch when validated, else last
  std::vector<EpochRecord> trace;
  std::vector<double> step_losses;  // mean batch loss before each update
  int best_epoch = 0;
};

// Validation hook; returns the Avg metric of a candidate model. The caller
// owns the full (seen + unseen) text set, so fit() itself only ever sees the
// seen-only text matrix.
using Validator = std::function<double(const FineTunedModel&)>;

// Indices kept by per-class subsampling: a seeded shuffle, then the first
// ceil(ratio * n_c) videos of each class (background-only videos form their
// own group). Returned in ascending order.
std::vector<std::size_t> subsample_per_class(const std::vector<LabeledSample>& samples,
                                             double ratio, std::uint64_t seed);

// Rows of `full_text` (full-vocabulary order) for the seen classes and the
// special class, i.e. the only text fit() may read.
Matrix seen_only_text(const Matrix& full_text, const ClassVocabulary& vocab);

// Fine-tunes `initial` on seen-class videos. `seen_text` has one row per
// seen-only vocabulary index.
FitResult fit(const FineTunedModel& initial, const std::vector<LabeledSample>& train_set,
              const Matrix& seen_text, const ClassVocabulary& vocab, const TrainConfig& config,
              const Validator& validate = nullptr);

struct InferenceResult {
  PredictionSequence prediction;
  Matrix probabilities;  // T x (C + 1)
};

InferenceResult infer(const FineTunedModel& model, const SegmentEmbeddings& audio,
                      const SegmentEmbeddings& visual, const Matrix& full_text,
                      const ClassVocabulary& vocab, FusionMode mode);

std::string trace_to_jsonl(const std::vector<EpochRecord>& trace);

}  // namespace avel

#endif  // AVEL_TRAINER_H_
