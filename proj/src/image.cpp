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

#include "avra/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "avra/error.hpp"

namespace avra {
namespace {

std::vector<std::uint8_t> encode(const std::uint8_t* raster, std::size_t width, std::size_t height,
                                 png_uint_32 format) {
  if (width == 0 || height == 0) throw InvalidArgument("cannot encode an empty image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raster, 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, raster, 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::uint8_t to_gray_level(float intensity) {
  const float clamped = std::clamp(intensity, 0.0F, 1.0F);
  return static_cast<std::uint8_t>(std::lround(255.0F * clamped));
}

RgbImage to_rgb(const SpectrogramImage& image) {
  RgbImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const std::uint8_t g = to_gray_level(image.pixels[i]);
    out.rgb[3 * i] = g;
    out.rgb[3 * i + 1] = g;
    out.rgb[3 * i + 2] = g;
  }
  return out;
}

namespace png {

std::vector<std::uint8_t> encode_gray(const SpectrogramImage& image) {
  std::vector<std::uint8_t> raster(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), raster.begin(), to_gray_level);
  return encode(raster.data(), image.width, image.height, PNG_FORMAT_GRAY);
}

std::vector<std::uint8_t> encode_rgb(const RgbImage& image) {
  return encode(image.rgb.data(), image.width, image.height, PNG_FORMAT_RGB);
}

SpectrogramImage decode_gray(std::span<const std::uint8_t> bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("PNG decode failed: ") + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raster.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DecodeError(std::string("PNG decode failed: ") + img.message);
  }
  SpectrogramImage out(img.width, img.height);
  for (std::size_t i = 0; i < raster.size(); ++i) out.pixels[i] = static_cast<float>(raster[i]) / 255.0F;
  return out;
}

void write_gray(const std::filesystem::path& path, const SpectrogramImage& image) {
  write_file_bytes(path, encode_gray(image));
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  write_file_bytes(path, encode_rgb(image));
}

SpectrogramImage read_gray(const std::filesystem::path& path) {
  return decode_gray(read_file_bytes(path));
}

}  // namespace png

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace avra
