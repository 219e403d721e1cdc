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

#include "avel/temporal_model.h"
#include "binary_io.h"

namespace avel {
namespace {

constexpr std::string_view kMagic = "OVTM";
constexpr std::uint32_t kVersion = 1;
constexpr std::string_view kTemperatureTensor = "extra.temperature";

void put_tensor(std::string& out, std::string_view name, const Matrix& m, int rank) {
  binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  binary::put_u32(out, static_cast<std::uint32_t>(rank));
  if (rank == 2) binary::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  binary::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) binary::put_f32(out, static_cast<float>(m.data()[i]));
}

}  // namespace

std::string serialize_checkpoint(const TemporalEncoderConfig& config,
                                 const TemporalEncoderParams& params,
                                 const CheckpointExtras& extras) {
  validate_params(params, config);
  std::string out(kMagic);
  binary::put_u32(out, kVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(config.blocks));
  binary::put_u32(out, static_cast<std::uint32_t>(config.width));
  binary::put_u32(out, static_cast<std::uint32_t>(config.heads));
  binary::put_u32(out, static_cast<std::uint32_t>(config.ffn_dim));
  binary::put_u8(out, static_cast<std::uint8_t>(config.variant));
  binary::put_u8(out, static_cast<std::uint8_t>(config.attention_scope));
  binary::put_u8(out, config.share_modalities ? 1 : 0);

  auto tensors = named_tensors(params, config);
  binary::put_u32(out, static_cast<std::uint32_t>(tensors.size() + 1));
  for (const auto& t : tensors) put_tensor(out, t.name, *t.tensor, t.rank);
  put_tensor(out, kTemperatureTensor, Matrix::Constant(1, 1, extras.temperature), 1);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  binary::Reader in(bytes);
  if (in.take(4, "checkpoint magic") != kMagic) throw FormatError("not a checkpoint: bad magic");
  std::uint32_t version = in.u32("checkpoint version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config.blocks = static_cast<int>(in.u32("config"));
  ckpt.config.width = static_cast<int>(in.u32("config"));
  ckpt.config.heads = static_cast<int>(in.u32("config"));
  ckpt.config.ffn_dim = static_cast<int>(in.u32("config"));
  std::uint8_t variant = in.u8("config");
  std::uint8_t scope = in.u8("config");
  std::uint8_t share = in.u8("config");
  if (variant > 1 || scope > 2 || share > 1) throw FormatError("checkpoint config has invalid enums");
  ckpt.config.variant = static_cast<EncoderVariant>(variant);
  ckpt.config.attention_scope = static_cast<AttentionScope>(scope);
  ckpt.config.share_modalities = share == 1;
  ckpt.config.validate();

  ckpt.params = zero_params(ckpt.config);
  auto expected = named_tensors(ckpt.params, ckpt.config);
  std::uint32_t count = in.u32("tensor count");
  if (count != expected.size() + 1) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                std::to_string(expected.size() + 1));
  }
  Matrix temperature(1, 1);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = in.u32("tensor name length");
    std::string name(in.take(name_len, "tensor name"));
    Matrix* target = nullptr;
    int rank = 1;
    if (i < expected.size()) {
      if (name != expected[i].name) {
        throw FormatError("checkpoint tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                    expected[i].name + "'");
      }
      target = expected[i].tensor;
      rank = expected[i].rank;
    } else {
      if (name != kTemperatureTensor) throw FormatError("unexpected checkpoint tensor '" + name + "'");
      target = &temperature;
    }
    std::uint32_t stored_rank = in.u32("tensor rank");
    if (static_cast<int>(stored_rank) != rank) throw FormatError("tensor '" + name + "' has wrong rank");
    Eigen::Index rows = rank == 2 ? in.u32("tensor dims") : 1;
    Eigen::Index cols = in.u32("tensor dims");
    if (rows != target->rows() || cols != target->cols()) {
      throw FormatError("tensor '" + name + "' has wrong shape");
    }
    in.require(4 * static_cast<std::size_t>(rows * cols), "tensor data");
    for (Eigen::Index k = 0; k < target->size(); ++k) target->data()[k] = in.f32("tensor data");
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  ckpt.extras.temperature = temperature(0, 0);
  validate_params(ckpt.params, ckpt.config);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const TemporalEncoderConfig& config,
                     const TemporalEncoderParams& params, const CheckpointExtras& extras) {
  binary::write_file_atomic(path.string(), serialize_checkpoint(config, params, extras));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(binary::read_file(path.string()));
}

}  // namespace avel
