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

#include "avel/dataset.h"
#include "binary_io.h"

namespace avel {
namespace {
constexpr std::string_view kMagic = "OVAE";
}  // namespace

std::string serialize_container(const SegmentEmbeddings& embeddings) {
  embeddings.validate();
  std::string out(kMagic);
  out.reserve(kContainerHeaderBytes + 4 * embeddings.data.size());
  binary::put_u32(out, kContainerVersion);
  binary::put_u8(out, static_cast<std::uint8_t>(embeddings.modality));
  binary::put_u32(out, static_cast<std::uint32_t>(embeddings.segments()));
  binary::put_u32(out, static_cast<std::uint32_t>(embeddings.dim()));
  for (Eigen::Index i = 0; i < embeddings.data.size(); ++i) {
    binary::put_f32(out, static_cast<float>(embeddings.data.data()[i]));
  }
  return out;
}

SegmentEmbeddings deserialize_container(std::string_view bytes) {
  binary::Reader in(bytes);
  if (in.take(4, "container header") != kMagic) throw FormatError("bad container magic");
  std::uint32_t version = in.u32("container header");
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  std::uint8_t modality = in.u8("container header");
  if (modality > static_cast<std::uint8_t>(Modality::kText)) {
    throw FormatError("unknown container modality " + std::to_string(modality));
  }
  std::uint32_t segments = in.u32("container header");
  std::uint32_t dim = in.u32("container header");
  if (segments == 0 || dim == 0) throw FormatError("container header has a zero dimension");

  const std::size_t payload = 4ull * segments * dim;
  if (in.remaining() != payload) {
    const std::string what = "container payload: expected " +
                             std::to_string(kContainerHeaderBytes + payload) +
                             " bytes, file has " + std::to_string(bytes.size());
    if (in.remaining() < payload) throw TruncatedError("truncated " + what);
    throw FormatError("oversized " + what);
  }
  SegmentEmbeddings out;
  out.modality = static_cast<Modality>(modality);
  out.data.resize(segments, dim);
  for (Eigen::Index i = 0; i < out.data.size(); ++i) out.data.data()[i] = in.f32("payload");
  if (!out.data.allFinite()) throw FormatError("container payload has non-finite values");
  return out;
}

void write_container(const SegmentEmbeddings& embeddings, const std::filesystem::path& path) {
  binary::write_file_atomic(path.string(), serialize_container(embeddings));
}

SegmentEmbeddings read_container(const std::filesystem::path& path) {
  return deserialize_container(binary::read_file(path.string()));
}

}  // namespace avel
