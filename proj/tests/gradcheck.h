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

#ifndef AVEL_TESTS_GRADCHECK_H_
#define AVEL_TESTS_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "avel/trainer.h"
#include "test_util.h"

namespace avel::testing {

struct GradCheckResult {
  double worst = 0.0;  // largest per-tensor relative error
  std::string worst_tensor;
};

// Central differences (step 1e-4) of loss(fuse(softmax(similarity(forward))))
// against the analytic gradient, per parameter tensor and for log temperature.
// T=3, d=4, heads=2, ffn=8, K=3 seen-only classes.
inline GradCheckResult end_to_end_gradcheck(EncoderVariant variant, AttentionScope scope,
                                            FusionMode mode, std::uint64_t seed,
                                            bool shared = true) {
  std::mt19937_64 rng(seed);
  TemporalEncoderConfig c;
  c.blocks = 1;
  c.width = 4;
  c.heads = 2;
  c.ffn_dim = 8;
  c.variant = variant;
  c.attention_scope = scope;
  c.share_modalities = shared;
  // Glorot everywhere so no branch starts at an exact zero; tau = 0.5 keeps
  // probabilities away from the log clamp.
  FineTunedModel model = make_model(c, seed, InitScheme::kGlorot, 0.5);
  for (auto& nt : named_tensors(model.params, c)) {
    *nt.tensor += 0.1 * random_matrix(static_cast<int>(nt.tensor->rows()),
                                      static_cast<int>(nt.tensor->cols()), rng);
  }
  Matrix audio = random_matrix(3, 4, rng), visual = random_matrix(3, 4, rng);
  Matrix text = random_matrix(3, 4, rng);
  Matrix target = Matrix::Zero(3, 3);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int t = 0; t < 3; ++t) target(t, pick(rng)) = 1.0;

  LossGradients grads{zero_params(c), 0.0};
  loss_and_gradients(model, audio, visual, text, target, mode, &grads);

  const double h = 1e-4;
  auto loss = [&] { return loss_and_gradients(model, audio, visual, text, target, mode, nullptr); };
  auto rel = [](const Matrix& a, const Matrix& n) {
    return (a - n).norm() / std::max({a.norm(), n.norm(), 1e-6});
  };

  GradCheckResult out;
  auto record = [&](double e, const std::string& name) {
    if (!(e <= out.worst)) {
      out.worst = e;
      out.worst_tensor = name;
    }
  };
  auto params = named_tensors(model.params, c);
  auto analytic = named_tensors(grads.params, c);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& w = *params[k].tensor;
    Matrix numeric(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double up = loss();
      w.data()[i] = saved - h;
      const double down = loss();
      w.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    record(rel(*analytic[k].tensor, numeric), params[k].name);
  }
  const double log_tau = std::log(model.temperature);
  model.temperature = std::exp(log_tau + h);
  const double up = loss();
  model.temperature = std::exp(log_tau - h);
  const double down = loss();
  model.temperature = std::exp(log_tau);
  Matrix a(1, 1), n(1, 1);
  a(0, 0) = grads.log_temperature;
  n(0, 0) = (up - down) / (2 * h);
  record(rel(a, n), "log_temperature");
  return out;
}

}  // namespace avel::testing

#endif  // AVEL_TESTS_GRADCHECK_H_
