/*
 * Copyright 2026 The gcnhash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GCNHASH_BINARY_IO_H_
#define GCNHASH_BINARY_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gcnhash {

// Little-endian encoder for the on-disk formats. Independent of host order.
class ByteWriter {
 public:
  void PutBytes(std::string_view bytes) { buffer_.append(bytes); }
  void PutU8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void PutU32(std::uint32_t v);
  void PutU64(std::uint64_t v);
  void PutF32(float v);
  void PutF64(double v);
  // u32 length prefix followed by the raw bytes.
  void PutString(std::string_view s);

  const std::string& bytes() const { return buffer_; }
  std::string Release() { return std::move(buffer_); }

 private:
  std::string buffer_;
};

// Bounds-checked little-endian decoder. Every read names the field it is
// decoding so truncation errors point at the offending record.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::string_view GetBytes(std::size_t n, std::string_view field);
  std::uint8_t GetU8(std::string_view field);
  std::uint32_t GetU32(std::string_view field);
  std::uint64_t GetU64(std::string_view field);
  float GetF32(std::string_view field);
  double GetF64(std::string_view field);
  std::string GetString(std::string_view field);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& source() const { return source_; }

 private:
  void Require(std::size_t n, std::string_view field) const;

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string ReadFileBytes(const std::filesystem::path& path);

// Writes through a temporary sibling file and renames it into place.
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

std::uint32_t Crc32(std::string_view bytes);

}  // namespace gcnhash

#endif  // GCNHASH_BINARY_IO_H_
