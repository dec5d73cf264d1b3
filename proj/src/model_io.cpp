// Copyright 2026 The AVRA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avra/model_io.hpp"

#include <bit>
#include <cstring>

#include "avra/error.hpp"
#include "avra/image.hpp"

namespace avra::model_io {

void Writer::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::f64s(std::span<const double> v) {
  bytes_.reserve(bytes_.size() + 8 * v.size());
  for (double d : v) f64(d);
}

void Writer::header(ModelType type) {
  bytes_.insert(bytes_.end(), {'A', 'V', 'R', 'A'});
  u16(kContainerVersion);
  u16(static_cast<std::uint16_t>(type));
}

void Reader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError("truncated model file: needed " + std::to_string(n) + " more bytes at offset " +
                      std::to_string(pos_));
  }
}

std::uint8_t Reader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint16_t Reader::u16() {
  need(2);
  const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

void Reader::f64s(std::span<double> out) {
  need(8 * out.size());
  for (double& d : out) d = f64();
}

void Reader::header(ModelType expected) {
  need(8);
  if (std::memcmp(bytes_.data(), "AVRA", 4) != 0) throw FormatError("bad magic: not an AVRA model file");
  pos_ = 4;
  const std::uint16_t version = u16();
  if (version != kContainerVersion) {
    throw FormatError("unsupported model container version " + std::to_string(version));
  }
  const std::uint16_t type = u16();
  if (type != static_cast<std::uint16_t>(expected)) {
    throw FormatError("model type tag " + std::to_string(type) + " where " +
                      type_name(expected) + " (" + std::to_string(static_cast<int>(expected)) + ") expected");
  }
}

void Reader::expect_end() const {
  if (remaining() != 0) throw FormatError("trailing bytes after model body");
}

ModelType peek_type(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("truncated model file: header incomplete");
  if (std::memcmp(bytes.data(), "AVRA", 4) != 0) throw FormatError("bad magic: not an AVRA model file");
  Reader r(bytes.subspan(4));
  const std::uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw FormatError("unsupported model container version " + std::to_string(version));
  }
  const std::uint16_t type = r.u16();
  if (type != 1 && type != 2) throw FormatError("unknown model type tag " + std::to_string(type));
  return static_cast<ModelType>(type);
}

ModelType peek_type_file(const std::filesystem::path& path) { return peek_type(read_file_bytes(path)); }

std::string type_name(ModelType type) { return type == ModelType::Svm ? "svm" : "cnn"; }

}  // namespace avra::model_io
