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

#pragma once

// Shared "AVRA" model container. Every file begins with
//
//   magic   4 bytes  "AVRA"
//   version u16      kContainerVersion
//   type    u16      1 = SVM, 2 = CNN
//
// followed by a type-specific body. All integers and IEEE-754 doubles are
// little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace avra::model_io {

inline constexpr std::uint16_t kContainerVersion = 1;

enum class ModelType : std::uint16_t { Svm = 1, Cnn = 2 };

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> v);
  void header(ModelType type);

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; any overrun raises FormatError("truncated ...").
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void f64s(std::span<double> out);

  /// Validates magic and version, and that the type tag equals `expected`.
  void header(ModelType expected);

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Reads only the header and returns the type tag.
ModelType peek_type(std::span<const std::uint8_t> bytes);
ModelType peek_type_file(const std::filesystem::path& path);

std::string type_name(ModelType type);

}  // namespace avra::model_io
