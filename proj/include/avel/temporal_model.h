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

#ifndef AVEL_TEMPORAL_MODEL_H_
#define AVEL_TEMPORAL_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "avel/core.h"

namespace avel {

enum class EncoderVariant : std::uint8_t { kTemporal = 0, kLinear = 1 };

// Which tokens a block attends over: its own stream (intra), the other
// modality's stream (cross), or intra followed by cross.
enum class AttentionScope : std::uint8_t { kIntra = 0, kCross = 1, kBoth = 2 };

// kResidualZero zeroes the attention output projection and the second FFN
// layer so a fresh encoder is the identity map; linear layers start at the
// identity. kGlorot draws every weight matrix from the Glorot uniform range.
enum class InitScheme { kResidualZero, kGlorot };

struct TemporalEncoderConfig {
  int blocks = 1;
  int width = kDefaultEmbeddingDim;
  int heads = 8;
  int ffn_dim = 2048;
  EncoderVariant variant = EncoderVariant::kTemporal;
  AttentionScope attention_scope = AttentionScope::kIntra;
  bool share_modalities = true;

  void validate() const;
  bool operator==(const TemporalEncoderConfig&) const = default;
};

std::string to_string(EncoderVariant v);
std::string to_string(AttentionScope s);
EncoderVariant parse_variant(std::string_view text);
AttentionScope parse_attention_scope(std::string_view text);

struct LayerNormParams {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
};

// Projections act on row vectors: q = x * wq + bq.
struct AttentionParams {
  Matrix wq, wk, wv, wo;  // d x d
  Matrix bq, bk, bv, bo;  // 1 x d
};

struct FeedForwardParams {
  Matrix w1;  // d x ffn
  Matrix b1;  // 1 x ffn
  Matrix w2;  // ffn x d
  Matrix b2;  // 1 x d
};

// Pre-norm transformer block. Only the sublayers enabled by the attention
// scope are populated.
struct BlockParams {
  LayerNormParams self_norm;
  AttentionParams self_attention;
  LayerNormParams cross_norm;
  AttentionParams cross_attention;
  LayerNormParams ffn_norm;
  FeedForwardParams ffn;
};

struct AffineParams {
  Matrix weight;  // d x d
  Matrix bias;    // 1 x d
};

struct StreamParams {
  std::vector<BlockParams> blocks;       // temporal variant
  std::vector<AffineParams> linear;      // linear variant
};

// Learnable weights. One stream when modalities share weights, otherwise
// [audio, visual].
struct TemporalEncoderParams {
  std::vector<StreamParams> streams;
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
  int rank;  // 1 for biases and norm vectors, 2 for weight matrices
};

struct ConstNamedTensor {
  std::string name;
  const Matrix* tensor;
  int rank;
};

// Every parameter tensor in a fixed, documented order.
std::vector<NamedTensor> named_tensors(TemporalEncoderParams& params,
                                       const TemporalEncoderConfig& config);
std::vector<ConstNamedTensor> named_tensors(const TemporalEncoderParams& params,
                                            const TemporalEncoderConfig& config);

// All tensors shaped for `config` and filled with zeros.
TemporalEncoderParams zero_params(const TemporalEncoderConfig& config);

TemporalEncoderParams init_params(const TemporalEncoderConfig& config, std::uint64_t seed,
                                  InitScheme scheme = InitScheme::kResidualZero);

std::int64_t param_count(const TemporalEncoderConfig& config);

// Throws ShapeError on shape mismatch or non-finite entries.
void validate_params(const TemporalEncoderParams& params, const TemporalEncoderConfig& config);

struct EncoderOutput {
  Matrix audio;
  Matrix visual;
};

EncoderOutput forward(const TemporalEncoderParams& params, const TemporalEncoderConfig& config,
                      const Matrix& audio, const Matrix& visual);

struct EncoderGradients {
  TemporalEncoderParams params;
  Matrix audio;   // dLoss/d(audio input)
  Matrix visual;  // dLoss/d(visual input)
};

// Recomputes the forward pass and backpropagates the output gradients.
EncoderGradients backward(const TemporalEncoderParams& params,
                          const TemporalEncoderConfig& config, const Matrix& audio,
                          const Matrix& visual, const Matrix& grad_audio_out,
                          const Matrix& grad_visual_out);

// Forward pass that keeps activations for a later backward call.
class EncoderTape {
 public:
  EncoderTape(const TemporalEncoderParams& params, const TemporalEncoderConfig& config,
              const Matrix& audio, const Matrix& visual);
  ~EncoderTape();
  EncoderTape(EncoderTape&&) noexcept;
  EncoderTape& operator=(EncoderTape&&) noexcept;

  const EncoderOutput& output() const { return output_; }

  // Accumulates parameter gradients into `grads` (shaped like the params)
  // and returns the input gradients.
  std::pair<Matrix, Matrix> backward(const Matrix& grad_audio_out, const Matrix& grad_visual_out,
                                     TemporalEncoderParams& grads) const;

 private:
  struct Activations;
  const TemporalEncoderParams* params_;
  const TemporalEncoderConfig* config_;
  std::unique_ptr<Activations> activations_;
  EncoderOutput output_;
};

// Extra scalars stored alongside the encoder in a checkpoint.
struct CheckpointExtras {
  double temperature = 0.07;
};

// Binary checkpoint: "OVTM", u32 version, config, u32 tensor count, then per
// tensor (u32 name length, name, u32 rank, u32 dims..., f32 LE data).
void save_checkpoint(const std::filesystem::path& path, const TemporalEncoderConfig& config,
                     const TemporalEncoderParams& params, const CheckpointExtras& extras = {});

struct Checkpoint {
  TemporalEncoderConfig config;
  TemporalEncoderParams params;
  CheckpointExtras extras;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const TemporalEncoderConfig& config,
                                 const TemporalEncoderParams& params,
                                 const CheckpointExtras& extras = {});
Checkpoint deserialize_checkpoint(std::string_view bytes);

}  // namespace avel

#endif  // AVEL_TEMPORAL_MODEL_H_
