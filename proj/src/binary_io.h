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

#ifndef AVEL_SRC_BINARY_IO_H_
#define AVEL_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "avel/core.h"

namespace avel::binary {

// Little-endian writers and a bounds-checked reader for the on-disk formats.

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw TruncatedError("truncated " + std::string(what) + ": expected " +
                           std::to_string(offset_ + n) + " bytes, file has " +
                           std::to_string(bytes_.size()));
    }
  }

  std::uint8_t u8(std::string_view what) {
    require(1, what);
    return static_cast<std::uint8_t>(bytes_[offset_++]);
  }

  std::uint32_t u32(std::string_view what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[offset_ + i])) << (8 * i);
    }
    offset_ += 4;
    return v;
  }

  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

  std::string_view take(std::size_t n, std::string_view what) {
    require(n, what);
    auto out = bytes_.substr(offset_, n);
    offset_ += n;
    return out;
  }

 private:
  std::string_view bytes_;
  std::size_t offset_ = 0;
};

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace avel::binary

#endif  // AVEL_SRC_BINARY_IO_H_
