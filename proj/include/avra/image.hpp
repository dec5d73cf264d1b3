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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace avra {

/// Grayscale intensity grid in [0, 1]. Columns are time, rows are mel bands
/// with row 0 holding the highest band (low frequencies at the bottom).
struct SpectrogramImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;  // row-major, height * width

  SpectrogramImage() = default;
  SpectrogramImage(std::size_t w, std::size_t h, float fill = 0.0F)
      : width(w), height(h), pixels(w * h, fill) {}

  [[nodiscard]] float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  float& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  [[nodiscard]] bool empty() const { return width == 0 || height == 0; }

  friend bool operator==(const SpectrogramImage&, const SpectrogramImage&) = default;
};

/// 8-bit RGB raster used for annotated output.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  void set(std::size_t row, std::size_t col, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = &rgb[(row * width + col) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Gray level used when a spectrogram is exported: round(255 * I).
std::uint8_t to_gray_level(float intensity);

RgbImage to_rgb(const SpectrogramImage& image);

namespace png {

std::vector<std::uint8_t> encode_gray(const SpectrogramImage& image);
std::vector<std::uint8_t> encode_rgb(const RgbImage& image);

/// Any PNG libpng understands; color input is reduced to luminance.
SpectrogramImage decode_gray(std::span<const std::uint8_t> bytes);

void write_gray(const std::filesystem::path& path, const SpectrogramImage& image);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);
SpectrogramImage read_gray(const std::filesystem::path& path);

}  // namespace png

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace avra
