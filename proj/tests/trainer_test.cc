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
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "avel/dataset.h"
#include "avel/trainer.h"
#include "avel/zeroshot.h"
#include "gradcheck.h"
#include "test_util.h"

namespace avel {
namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double v : values) m(0, k++) = v;
  return m;
}

TEST(Fuse, SqrtRenormalized) {
  Matrix f = fuse(row({0.8, 0.2}), row({0.5, 0.5}), FusionMode::kSqrt);
  EXPECT_NEAR(f(0, 0), 0.6667, 1e-4);
  EXPECT_NEAR(f(0, 1), 0.3333, 1e-4);
  // Unnormalized geometric means are sqrt(0.4) and sqrt(0.1).
  EXPECT_NEAR(f(0, 0), std::sqrt(0.4) / (std::sqrt(0.4) + std::sqrt(0.1)), 1e-12);
}

TEST(Fuse, SqrtSymmetricDisagreement) {
  Matrix f = fuse(row({0.9, 0.1}), row({0.1, 0.9}), FusionMode::kSqrt);
  EXPECT_NEAR(f(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(f(0, 1), 0.5, 1e-12);
}

TEST(Fuse, SqrtOfEqualInputsIsInput) {
  std::mt19937_64 rng(1);
  Matrix p = softmax_rows(testing::random_matrix(5, 6, rng), 0.3);
  Matrix f = fuse(p, p, FusionMode::kSqrt);
  EXPECT_LT((f - p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fuse, ZeroOverlapRowBecomesUniform) {
  Matrix f = fuse(row({1.0, 0.0}), row({0.0, 1.0}), FusionMode::kSqrt);
  EXPECT_EQ(f(0, 0), 0.5);
  EXPECT_EQ(f(0, 1), 0.5);
}

TEST(Fuse, ProbAvgAndPassThrough) {
  Matrix a = row({0.8, 0.2}), v = row({0.5, 0.5});
  Matrix avg = fuse(a, v, FusionMode::kProbAvg);
  EXPECT_NEAR(avg(0, 0), 0.65, 1e-15);
  EXPECT_NEAR(avg(0, 1), 0.35, 1e-15);
  EXPECT_EQ(fuse(a, v, FusionMode::kFeaAvg), a);
}

TEST(Fuse, Errors) {
  EXPECT_THROW(fuse(row({0.5, 0.5}), row({1.0}), FusionMode::kSqrt), ShapeError);
  EXPECT_THROW(fuse(row({1.5, -0.5}), row({0.5, 0.5}), FusionMode::kProbAvg), Error);
  EXPECT_THROW(fuse(row({1.5, -0.5}), row({0.5, 0.5}), FusionMode::kFeaAvg), Error);
}

// Both fusions keep the shared argmax when the modalities agree.
TEST(Fuse, AgreeingArgmaxSurvivesBothFusions) {
  std::mt19937_64 rng(2);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Matrix pa = softmax_rows(testing::random_matrix(1, 5, rng), 0.5);
    Matrix pv = softmax_rows(testing::random_matrix(1, 5, rng), 0.5);
    auto a = row_argmax(pa)[0];
    if (a != row_argmax(pv)[0]) continue;
    ++checked;
    EXPECT_EQ(row_argmax(fuse(pa, pv, FusionMode::kSqrt))[0], a);
    EXPECT_EQ(row_argmax(fuse(pa, pv, FusionMode::kProbAvg))[0], a);
  }
  EXPECT_GT(checked, 100);
}

TEST(CrossEntropy, Examples) {
  EXPECT_EQ(cross_entropy(row({0.0, 1.0, 0.0}), row({0.0, 1.0, 0.0})), 0.0);
  EXPECT_NEAR(cross_entropy(Matrix::Constant(2, 5, 0.2), Matrix::Identity(2, 5)), std::log(5.0),
              1e-12);
  EXPECT_NEAR(cross_entropy(row({0.5, 0.5}), row({1.0, 0.0})), 0.6931, 1e-4);
  EXPECT_NEAR(cross_entropy(row({0.5, 0.5}), row({1.0, 0.0})), std::log(2.0), 1e-12);
  // log clamp
  EXPECT_NEAR(cross_entropy(row({1.0, 0.0}), row({0.0, 1.0})), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, Errors) {
  EXPECT_THROW(cross_entropy(row({0.5, 0.4}), row({1.0, 0.0})), Error);
  EXPECT_THROW(cross_entropy(row({0.5, 0.5}), row({1.0, 1.0})), Error);
  EXPECT_THROW(cross_entropy(row({0.5, 0.5}), row({0.5, 0.5})), Error);
  EXPECT_THROW(cross_entropy(row({0.5, 0.5}), row({1.0, 0.0, 0.0})), ShapeError);
}

TEST(Gradient, EndToEndAllVariants) {
  std::uint64_t seed = 100;
  for (auto variant : {EncoderVariant::kTemporal, EncoderVariant::kLinear}) {
    for (auto scope : {AttentionScope::kIntra, AttentionScope::kCross, AttentionScope::kBoth}) {
      for (auto mode : {FusionMode::kSqrt, FusionMode::kProbAvg, FusionMode::kFeaAvg}) {
        for (bool shared : {true, false}) {
          auto r = testing::end_to_end_gradcheck(variant, scope, mode, ++seed, shared);
          EXPECT_LT(r.worst, 1e-4) << to_string(variant) << "/" << to_string(scope) << "/"
                                   << to_string(mode) << (shared ? "" : "/unshared") << " "
                                   << r.worst_tensor;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Training

struct SmallData {
  SynthDataset ds;
  std::vector<LabeledSample> train;
  std::vector<std::size_t> val;  // indices into ds.videos
  Matrix seen_text;
};

SmallData small_data(double sigma, std::uint64_t seed, int videos_per_class = 8) {
  SynthSpec spec;
  spec.n_classes = 5;
  spec.n_seen = 3;
  spec.videos_per_class = videos_per_class;
  spec.dim = 8;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  SmallData out{synth_generate(spec), {}, {}, {}};
  for (std::size_t i = 0; i < out.ds.videos.size(); ++i) {
    const auto& e = out.ds.manifest.entries[i];
    if (e.split == Split::kTrain) out.train.push_back({out.ds.videos[i], e.label()});
    if (e.split == Split::kVal) out.val.push_back(i);
  }
  out.seen_text = seen_only_text(out.ds.text, out.ds.vocab);
  return out;
}

TemporalEncoderConfig small_encoder(EncoderVariant variant = EncoderVariant::kTemporal) {
  TemporalEncoderConfig c;
  c.width = 8;
  c.heads = 2;
  c.ffn_dim = 16;
  c.variant = variant;
  return c;
}

TEST(SeenOnlyText, KeepsSeenAndSpecialRows) {
  ClassVocabulary v({"a", "b"}, {"c"});
  Matrix full(4, 2);
  full << 1, 2, 3, 4, 5, 6, 7, 8;
  Matrix s = seen_only_text(full, v);
  Matrix expected(3, 2);
  expected << 1, 2, 3, 4, 7, 8;
  EXPECT_EQ(s, expected);
  EXPECT_THROW(seen_only_text(Matrix::Ones(3, 2), v), ShapeError);
}

TEST(Fit, ZeroLearningRateLeavesParamsUnchanged) {
  auto d = small_data(0.1, 1);
  auto model = make_model(small_encoder(), 3, InitScheme::kGlorot);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 2;
  tc.batch_size = 4;
  auto r = fit(model, d.train, d.seen_text, d.ds.vocab, tc);
  EXPECT_EQ(serialize_checkpoint(r.model.config, r.model.params),
            serialize_checkpoint(model.config, model.params));
  auto a = named_tensors(r.model.params, model.config);
  auto b = named_tensors(model.params, model.config);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k].tensor, *b[k].tensor);
}

TEST(Fit, SingleSampleLossDecreases) {
  auto d = small_data(0.0, 2);
  std::vector<LabeledSample> one = {d.train.front()};
  auto model = make_model(small_encoder(), 4);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = 6;
  tc.batch_size = 1;
  auto r = fit(model, one, d.seen_text, d.ds.vocab, tc);
  ASSERT_EQ(r.step_losses.size(), 6u);
  for (std::size_t i = 1; i < r.step_losses.size(); ++i) {
    EXPECT_LT(r.step_losses[i], r.step_losses[i - 1]) << "step " << i;
  }
  ASSERT_EQ(r.trace.size(), 6u);
  EXPECT_EQ(r.trace[0].epoch, 1);
  EXPECT_FALSE(r.trace[0].val_avg.has_value());
}

TEST(Fit, DataRatioTakesCeilPerClass) {
  auto d = small_data(0.1, 3, 7);
  std::map<std::string, int> per_class, kept_per_class;
  for (const auto& s : d.train) ++per_class[s.label.event_class];
  for (double ratio : {0.5, 0.25, 1.0}) {
    kept_per_class.clear();
    for (auto i : subsample_per_class(d.train, ratio, 9)) ++kept_per_class[d.train[i].label.event_class];
    for (const auto& [name, n] : per_class) {
      EXPECT_EQ(kept_per_class[name], static_cast<int>(std::ceil(ratio * n))) << name << " " << ratio;
    }
  }
  EXPECT_EQ(subsample_per_class(d.train, 0.5, 9), subsample_per_class(d.train, 0.5, 9));
  EXPECT_THROW(subsample_per_class(d.train, 0.0, 9), Error);
  EXPECT_THROW(subsample_per_class(d.train, 1.5, 9), Error);
}

TEST(Fit, DeterministicAcrossRunsAndJobCounts) {
  auto d = small_data(0.2, 4);
  auto model = make_model(small_encoder(), 5);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.seed = 77;
  tc.learn_temperature = true;
  tc.data_ratio = 0.75;
  auto r1 = fit(model, d.train, d.seen_text, d.ds.vocab, tc);
  tc.jobs = 3;
  auto r2 = fit(model, d.train, d.seen_text, d.ds.vocab, tc);
  EXPECT_EQ(serialize_checkpoint(r1.model.config, r1.model.params, {r1.model.temperature}),
            serialize_checkpoint(r2.model.config, r2.model.params, {r2.model.temperature}));
  EXPECT_EQ(r1.step_losses, r2.step_losses);
  EXPECT_NE(r1.model.temperature, model.temperature);
  tc.seed = 78;
  auto r3 = fit(model, d.train, d.seen_text, d.ds.vocab, tc);
  EXPECT_NE(r1.step_losses, r3.step_losses);
}

TEST(Fit, BestEpochFollowsValidator) {
  auto d = small_data(0.1, 5);
  auto model = make_model(small_encoder(), 6);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.epochs = 4;
  tc.batch_size = 8;
  std::vector<double> scores = {0.2, 0.9, 0.5, 0.9};
  std::vector<TemporalEncoderParams> seen_models;
  int call = 0;
  auto r = fit(model, d.train, d.seen_text, d.ds.vocab, tc, [&](const FineTunedModel& m) {
    seen_models.push_back(m.params);
    return scores[call++];
  });
  EXPECT_EQ(call, 4);
  EXPECT_EQ(r.best_epoch, 2);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(*r.trace[1].val_avg, 0.9);
  auto best = named_tensors(r.model.params, model.config);
  auto epoch2 = named_tensors(seen_models[1], model.config);
  for (std::size_t k = 0; k < best.size(); ++k) EXPECT_EQ(*best[k].tensor, *epoch2[k].tensor);
  EXPECT_NE(trace_to_jsonl(r.trace).find("\"epoch\":2,"), std::string::npos);
}

TEST(Fit, TraceJsonLines) {
  std::vector<EpochRecord> trace = {{1, 0.5, 0.75}, {2, 0.25, std::nullopt}};
  EXPECT_EQ(trace_to_jsonl(trace),
            "{\"epoch\":1,\"loss\":0.5,\"val_avg\":0.75}\n{\"epoch\":2,\"loss\":0.25,\"val_avg\":null}\n");
}

TEST(Fit, RejectsBadInput) {
  auto d = small_data(0.1, 6);
  auto model = make_model(small_encoder(), 1);
  TrainConfig tc;
  EXPECT_THROW(fit(model, {}, d.seen_text, d.ds.vocab, tc), Error);
  // Unseen-class video in the training set.
  for (std::size_t i = 0; i < d.ds.videos.size(); ++i) {
    const auto& e = d.ds.manifest.entries[i];
    if (d.ds.vocab.is_unseen(e.event_class)) {
      auto bad = d.train;
      bad.push_back({d.ds.videos[i], e.label()});
      EXPECT_THROW(fit(model, bad, d.seen_text, d.ds.vocab, tc), ScopeError);
      break;
    }
  }
  // Full text instead of seen-only text.
  EXPECT_THROW(fit(model, d.train, d.ds.text, d.ds.vocab, tc), ShapeError);
  TrainConfig bad = tc;
  bad.batch_size = 0;
  EXPECT_THROW(fit(model, d.train, d.seen_text, d.ds.vocab, bad), Error);
  bad = tc;
  bad.data_ratio = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = tc;
  bad.temperature = -1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Infer, IdentityModelMatchesSoftmaxFusedZeroShotScores) {
  auto d = small_data(0.3, 7);
  for (auto variant : {EncoderVariant::kTemporal, EncoderVariant::kLinear}) {
    auto model = make_model(small_encoder(variant), 2);
    for (auto mode : {FusionMode::kSqrt, FusionMode::kProbAvg}) {
      for (std::size_t i = 0; i < 10; ++i) {
        const auto& v = d.ds.videos[i];
        auto zs = localize_with_scores(v.audio, v.visual, d.ds.text, d.ds.vocab);
        Matrix expected = fuse(softmax_rows(zs.audio_text.scores, model.temperature),
                               softmax_rows(zs.visual_text.scores, model.temperature), mode);
        auto r = infer(model, v.audio, v.visual, d.ds.text, d.ds.vocab, mode);
        EXPECT_LT((r.probabilities - expected).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(r.prediction.classes, row_argmax(expected));
      }
    }
  }
}

TEST(Infer, FarUnseenTextNeverPredicted) {
  // Seen prototypes e0, e1, special e2; segments are positive mixtures of
  // them, unseen text points the other way.
  ClassVocabulary vocab({"a", "b"}, {"c", "d"});
  Matrix text = Matrix::Zero(5, 6);
  text(0, 0) = text(1, 1) = text(4, 2) = 1.0;
  text.row(2) << -1, -1, -1, 0, 0, 0;
  text.row(3) << -1, 0, -1, 0, 0, 0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  auto model = make_model(small_encoder(), 3);
  model.config.width = 6;
  model.params = init_params(model.config, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = Matrix::Zero(4, 6), v = Matrix::Zero(4, 6);
    for (int t = 0; t < 4; ++t) {
      for (int k = 0; k < 3; ++k) {
        a(t, k) = u(rng);
        v(t, k) = u(rng);
      }
    }
    for (auto mode : {FusionMode::kSqrt, FusionMode::kProbAvg, FusionMode::kFeaAvg}) {
      auto r = infer(model, {Modality::kAudio, a}, {Modality::kVisual, v}, text, vocab, mode);
      for (int c : r.prediction.classes) EXPECT_TRUE(c == 0 || c == 1 || c == 4) << c;
      EXPECT_EQ(r.probabilities.cols(), 5);
    }
  }
}

TEST(Infer, TextRowMismatch) {
  auto d = small_data(0.1, 9);
  auto model = make_model(small_encoder(), 1);
  const auto& v = d.ds.videos[0];
  EXPECT_THROW(infer(model, v.audio, v.visual, d.seen_text, d.ds.vocab, FusionMode::kSqrt),
               ShapeError);
}

TEST(Infer, NoiseFreeFineTuningRecoversSeenValidationTruth) {
  auto d = small_data(0.0, 10, 12);
  auto model = make_model(small_encoder(), 11);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.seed = 12;
  auto r = fit(model, d.train, d.seen_text, d.ds.vocab, tc);
  int checked = 0;
  for (auto i : d.val) {
    const auto& e = d.ds.manifest.entries[i];
    if (!d.ds.vocab.is_seen(e.event_class)) continue;
    ++checked;
    auto p = infer(r.model, d.ds.videos[i].audio, d.ds.videos[i].visual, d.ds.text, d.ds.vocab,
                   tc.fusion);
    EXPECT_EQ(p.prediction.classes, segment_classes(e.label(), d.ds.vocab, Scope::kFull)) << e.video_id;
  }
  EXPECT_GT(checked, 0);
}

}  // namespace
}  // namespace avel
