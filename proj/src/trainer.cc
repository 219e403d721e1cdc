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

#include "avel/trainer.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "avel/parallel.h"
#include "json.hpp"

namespace avel {
namespace {

constexpr double kLogClamp = 1e-12;
constexpr double kRowSumTolerance = 1e-6;

void check_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

// Row-wise <a, b>.
Eigen::VectorXd row_dot(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).rowwise().sum();
}

// Gradient of softmax(z) w.r.t. z (unit temperature) given dL/dprobs.
Matrix softmax_logit_grad(const Matrix& probs, const Matrix& grad_probs) {
  Matrix g = grad_probs;
  g.colwise() -= row_dot(probs, grad_probs);
  return probs.cwiseProduct(g);
}

// Forward intermediates of one video through similarity, softmax and fusion.
struct HeadPass {
  Matrix normalized_audio, normalized_visual, normalized_fused;
  Matrix audio_scores, visual_scores, fused_scores;
  Matrix audio_probs, visual_probs;
  Matrix fused;
};

HeadPass run_head(const Matrix& audio_features, const Matrix& visual_features,
                  const Matrix& normalized_text, double temperature, FusionMode mode) {
  HeadPass pass;
  if (mode == FusionMode::kFeaAvg) {
    Matrix mean = 0.5 * (audio_features + visual_features);
    pass.normalized_fused = l2_normalize_rows(mean);
    pass.fused_scores = pass.normalized_fused * normalized_text.transpose();
    pass.fused = softmax_rows(pass.fused_scores, temperature);
    return pass;
  }
  pass.normalized_audio = l2_normalize_rows(audio_features);
  pass.normalized_visual = l2_normalize_rows(visual_features);
  pass.audio_scores = pass.normalized_audio * normalized_text.transpose();
  pass.visual_scores = pass.normalized_visual * normalized_text.transpose();
  pass.audio_probs = softmax_rows(pass.audio_scores, temperature);
  pass.visual_probs = softmax_rows(pass.visual_scores, temperature);
  pass.fused = fuse(pass.audio_probs, pass.visual_probs, mode);
  return pass;
}

struct AdamState {
  TemporalEncoderParams m, v;
  double m_temp = 0.0, v_temp = 0.0;
  long step = 0;
};

void adam_update(double& param, double& m, double& v, double grad, const TrainConfig& c,
                 double bias1, double bias2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad * grad;
  double m_hat = m / bias1;
  double v_hat = v / bias2;
  param -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
}

std::vector<int> seen_targets(const LabelSequence& label, const ClassVocabulary& vocab) {
  return segment_classes(label, vocab, Scope::kSeenOnly);
}

Matrix one_hot(const std::vector<int>& classes, int width) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), width);
  for (std::size_t t = 0; t < classes.size(); ++t) y(t, classes[t]) = 1.0;
  return y;
}

}  // namespace

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kSqrt:
      return "sqrt";
    case FusionMode::kProbAvg:
      return "prob_avg";
    case FusionMode::kFeaAvg:
      return "fea_avg";
  }
  return "sqrt";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "sqrt") return FusionMode::kSqrt;
  if (text == "prob_avg") return FusionMode::kProbAvg;
  if (text == "fea_avg") return FusionMode::kFeaAvg;
  throw Error("unknown fusion mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("batch size must be positive");
  if (epochs < 1) throw Error("epoch count must be positive");
  if (!(learning_rate >= 0.0)) throw Error("learning rate must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error("Adam epsilon must be positive");
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (!(data_ratio > 0.0 && data_ratio <= 1.0)) throw Error("data ratio must lie in (0, 1]");
}

FineTunedModel make_model(const TemporalEncoderConfig& config, std::uint64_t seed,
                          InitScheme scheme, double temperature) {
  return {config, init_params(config, seed, scheme), temperature};
}

Matrix fuse(const Matrix& audio_probs, const Matrix& visual_probs, FusionMode mode) {
  if (mode == FusionMode::kFeaAvg) {
    if ((audio_probs.array() < 0.0).any()) throw Error("fusion input has negative entries");
    return audio_probs;
  }
  check_same_shape(audio_probs, visual_probs, "fusion inputs");
  if ((audio_probs.array() < 0.0).any() || (visual_probs.array() < 0.0).any()) {
    throw Error("fusion input has negative entries");
  }
  if (mode == FusionMode::kProbAvg) return 0.5 * (audio_probs + visual_probs);

  Matrix fused = audio_probs.cwiseProduct(visual_probs).cwiseSqrt();
  for (Eigen::Index r = 0; r < fused.rows(); ++r) {
    double total = fused.row(r).sum();
    if (total > 0.0) {
      fused.row(r) /= total;
    } else {
      fused.row(r).setConstant(1.0 / static_cast<double>(fused.cols()));
    }
  }
  return fused;
}

double cross_entropy(const Matrix& fused, const Matrix& target) {
  check_same_shape(fused, target, "cross entropy");
  if (fused.rows() == 0) throw ShapeError("cross entropy of an empty sequence");
  double total = 0.0;
  for (Eigen::Index t = 0; t < fused.rows(); ++t) {
    if (std::abs(fused.row(t).sum() - 1.0) > kRowSumTolerance) {
      throw Error("fused row " + std::to_string(t) + " does not sum to 1");
    }
    Eigen::Index hot = -1;
    for (Eigen::Index k = 0; k < target.cols(); ++k) {
      if (target(t, k) == 1.0) {
        if (hot >= 0) throw Error("target row " + std::to_string(t) + " is not one-hot");
        hot = k;
      } else if (target(t, k) != 0.0) {
        throw Error("target row " + std::to_string(t) + " is not one-hot");
      }
    }
    if (hot < 0) throw Error("target row " + std::to_string(t) + " is not one-hot");
    total -= std::log(std::max(fused(t, hot), kLogClamp));
  }
  return total / static_cast<double>(fused.rows());
}

Matrix fused_probabilities(const FineTunedModel& model, const Matrix& audio,
                           const Matrix& visual, const Matrix& text, FusionMode mode) {
  EncoderOutput out = forward(model.params, model.config, audio, visual);
  return run_head(out.audio, out.visual, l2_normalize_rows(text), model.temperature, mode).fused;
}

double loss_and_gradients(const FineTunedModel& model, const Matrix& audio, const Matrix& visual,
                          const Matrix& text, const Matrix& target, FusionMode mode,
                          LossGradients* grads) {
  EncoderTape tape(model.params, model.config, audio, visual);
  const Matrix normalized_text = l2_normalize_rows(text);
  const double tau = model.temperature;
  HeadPass pass = run_head(tape.output().audio, tape.output().visual, normalized_text, tau, mode);
  const double loss = cross_entropy(pass.fused, target);
  if (grads == nullptr) return loss;

  const double segments = static_cast<double>(pass.fused.rows());
  Matrix dfused = Matrix::Zero(pass.fused.rows(), pass.fused.cols());
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    for (Eigen::Index k = 0; k < target.cols(); ++k) {
      if (target(t, k) == 1.0 && pass.fused(t, k) > kLogClamp) {
        dfused(t, k) = -1.0 / (segments * pass.fused(t, k));
      }
    }
  }

  Matrix daudio, dvisual;
  double dtau = 0.0;
  switch (mode) {
    case FusionMode::kSqrt: {
      // Renormalized sqrt(p_a * p_v) of two softmaxes is the softmax of the
      // averaged logits, so each modality receives half the logit gradient.
      Matrix dlogits = softmax_logit_grad(pass.fused, dfused);
      Matrix dscores = 0.5 * dlogits / tau;
      daudio = l2_normalize_rows_backward(tape.output().audio, pass.normalized_audio,
                                          dscores * normalized_text);
      dvisual = l2_normalize_rows_backward(tape.output().visual, pass.normalized_visual,
                                           dscores * normalized_text);
      dtau = -dlogits.cwiseProduct(pass.audio_scores + pass.visual_scores).sum() / (2.0 * tau * tau);
      break;
    }
    case FusionMode::kProbAvg: {
      Matrix dlogits_a = softmax_logit_grad(pass.audio_probs, 0.5 * dfused);
      Matrix dlogits_v = softmax_logit_grad(pass.visual_probs, 0.5 * dfused);
      daudio = l2_normalize_rows_backward(tape.output().audio, pass.normalized_audio,
                                          (dlogits_a / tau) * normalized_text);
      dvisual = l2_normalize_rows_backward(tape.output().visual, pass.normalized_visual,
                                           (dlogits_v / tau) * normalized_text);
      dtau = -(dlogits_a.cwiseProduct(pass.audio_scores).sum() +
               dlogits_v.cwiseProduct(pass.visual_scores).sum()) /
             (tau * tau);
      break;
    }
    case FusionMode::kFeaAvg: {
      Matrix dlogits = softmax_logit_grad(pass.fused, dfused);
      Matrix mean = 0.5 * (tape.output().audio + tape.output().visual);
      Matrix dmean = l2_normalize_rows_backward(mean, pass.normalized_fused,
                                                (dlogits / tau) * normalized_text);
      daudio = 0.5 * dmean;
      dvisual = daudio;
      dtau = -dlogits.cwiseProduct(pass.fused_scores).sum() / (tau * tau);
      break;
    }
  }
  tape.backward(daudio, dvisual, grads->params);
  grads->log_temperature += dtau * tau;
  return loss;
}

std::vector<std::size_t> subsample_per_class(const std::vector<LabeledSample>& samples,
                                             double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("data ratio must lie in (0, 1]");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i : order) by_class[samples[i].label.event_class].push_back(i);
  std::vector<std::size_t> kept;
  for (auto& [name, members] : by_class) {
    auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(members.size()) - 1e-9));
    kept.insert(kept.end(), members.begin(), members.begin() + std::min(keep, members.size()));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

Matrix seen_only_text(const Matrix& full_text, const ClassVocabulary& vocab) {
  if (full_text.rows() != vocab.size(Scope::kFull)) {
    throw ShapeError("text has " + std::to_string(full_text.rows()) + " rows; the vocabulary has " +
                     std::to_string(vocab.size(Scope::kFull)));
  }
  Matrix out(vocab.size(Scope::kSeenOnly), full_text.cols());
  out.topRows(vocab.seen_count()) = full_text.topRows(vocab.seen_count());
  out.bottomRows(1) = full_text.bottomRows(1);
  return out;
}

FitResult fit(const FineTunedModel& initial, const std::vector<LabeledSample>& train_set,
              const Matrix& seen_text, const ClassVocabulary& vocab, const TrainConfig& config,
              const Validator& validate) {
  config.validate();
  if (train_set.empty()) throw Error("training set is empty");
  const int classes = vocab.size(Scope::kSeenOnly);
  if (seen_text.rows() != classes) {
    throw ShapeError("training text has " + std::to_string(seen_text.rows()) +
                     " rows; the seen-only vocabulary has " + std::to_string(classes));
  }

  std::vector<Matrix> targets(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    targets[i] = one_hot(seen_targets(train_set[i].label, vocab), classes);
    if (targets[i].rows() != train_set[i].sample.audio.segments()) {
      throw ShapeError("video '" + train_set[i].label.video_id +
                       "' has a label length different from its segment count");
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> active = subsample_per_class(train_set, config.data_ratio, rng());

  FitResult result;
  result.model = initial;
  FineTunedModel model = initial;
  model.temperature = config.temperature;
  double log_tau = std::log(model.temperature);
  AdamState adam{zero_params(model.config), zero_params(model.config)};
  double best_val = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = active;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t batch = end - start;
      std::vector<LossGradients> per_sample(batch);
      std::vector<double> losses(batch, 0.0);
      parallel_for(batch, config.jobs, [&](std::size_t j) {
        const LabeledSample& s = train_set[order[start + j]];
        per_sample[j].params = zero_params(model.config);
        losses[j] = loss_and_gradients(model, s.sample.audio.data, s.sample.visual.data, seen_text,
                                       targets[order[start + j]], config.fusion, &per_sample[j]);
      });

      // Fixed summation order keeps results independent of the job count.
      LossGradients total{zero_params(model.config), 0.0};
      auto total_tensors = named_tensors(total.params, model.config);
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < batch; ++j) {
        auto tensors = named_tensors(per_sample[j].params, model.config);
        for (std::size_t k = 0; k < tensors.size(); ++k) *total_tensors[k].tensor += *tensors[k].tensor;
        total.log_temperature += per_sample[j].log_temperature;
        batch_loss += losses[j];
      }
      const double scale = 1.0 / static_cast<double>(batch);
      result.step_losses.push_back(batch_loss * scale);
      epoch_loss += batch_loss;

      ++adam.step;
      const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
      const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
      auto params = named_tensors(model.params, model.config);
      auto ms = named_tensors(adam.m, model.config);
      auto vs = named_tensors(adam.v, model.config);
      for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].tensor;
        const Matrix& g = *total_tensors[k].tensor;
        Matrix& m = *ms[k].tensor;
        Matrix& v = *vs[k].tensor;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          adam_update(p.data()[i], m.data()[i], v.data()[i], g.data()[i] * scale, config, bias1,
                      bias2);
        }
      }
      if (config.learn_temperature) {
        adam_update(log_tau, adam.m_temp, adam.v_temp, total.log_temperature * scale, config,
                    bias1, bias2);
        model.temperature = std::exp(log_tau);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = epoch_loss / static_cast<double>(order.size());
    if (validate) {
      record.val_avg = validate(model);
      if (*record.val_avg > best_val) {
        best_val = *record.val_avg;
        result.model = model;
        result.best_epoch = epoch;
      }
    }
    result.trace.push_back(record);
  }
  if (!validate) {
    result.model = model;
    result.best_epoch = config.epochs;
  }
  return result;
}

InferenceResult infer(const FineTunedModel& model, const SegmentEmbeddings& audio,
                      const SegmentEmbeddings& visual, const Matrix& full_text,
                      const ClassVocabulary& vocab, FusionMode mode) {
  audio.validate();
  visual.validate();
  if (full_text.rows() != vocab.size(Scope::kFull)) {
    throw ShapeError("inference text has " + std::to_string(full_text.rows()) +
                     " rows; the vocabulary has " + std::to_string(vocab.size(Scope::kFull)));
  }
  InferenceResult result;
  result.probabilities = fused_probabilities(model, audio.data, visual.data, full_text, mode);
  result.prediction.classes = row_argmax(result.probabilities);
  return result;
}

std::string trace_to_jsonl(const std::vector<EpochRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    nlohmann::ordered_json line;
    line["epoch"] = r.epoch;
    line["loss"] = r.loss;
    line["val_avg"] = r.val_avg ? nlohmann::ordered_json(*r.val_avg) : nlohmann::ordered_json();
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace avel
