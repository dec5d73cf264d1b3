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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avra/audio_io.hpp"
#include "avra/dsp.hpp"
#include "avra/image.hpp"

namespace avra {

enum class RegisterLabel : std::uint8_t { Chest = 0, Mix = 1, HeadMix = 2, Head = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::size_t kInputWidth = 154;
inline constexpr std::size_t kInputHeight = 128;
inline constexpr std::size_t kFeatureDim = kInputWidth * kInputHeight;  // 19712

[[nodiscard]] constexpr int code(RegisterLabel label) { return static_cast<int>(label); }

/// Throws InvalidArgument for codes outside 0..3.
RegisterLabel label_from_code(int code);
std::string_view label_name(RegisterLabel label);

}  // namespace avra

namespace avra::dataset {

struct Sample {
  std::vector<float> features;
  RegisterLabel label = RegisterLabel::Chest;
};

/// Fit inside 154x128 with an aspect-preserving bilinear resize
/// (corner-aligned), then center with zero padding. Exact-size images are
/// returned unchanged.
SpectrogramImage standardize(const SpectrogramImage& image);

/// Corner-aligned bilinear resize to an explicit size.
SpectrogramImage resize_bilinear(const SpectrogramImage& image, std::size_t width, std::size_t height);

SpectrogramImage hflip(const SpectrogramImage& image);

/// pixel <- min(1, pixel * factor); factor must be positive.
SpectrogramImage brightness(const SpectrogramImage& image, double factor);

inline constexpr std::array<double, 3> kBrightnessFactors{1.0, 0.8, 1.2};
inline constexpr std::size_t kAugmentMultiplicity = 6;

/// {original, hflip} x {1.0, 0.8, 1.2}: original x1.0, original x0.8,
/// original x1.2, flipped x1.0, flipped x0.8, flipped x1.2.
std::vector<SpectrogramImage> augment(const SpectrogramImage& image);

/// Row-major flattening of a 154x128 image into 19712 features.
std::vector<float> flatten(const SpectrogramImage& image);
SpectrogramImage unflatten(std::span<const float> features, std::size_t width = kInputWidth,
                           std::size_t height = kInputHeight);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: each class contributes round(train_fraction * n_c) of
/// its members, chosen by a seeded shuffle, to the training side. Each
/// index list is sorted ascending.
SplitIndices split_train_test(std::span<const RegisterLabel> labels, double train_fraction,
                              std::uint64_t seed);

std::array<std::size_t, kNumClasses> class_counts(std::span<const RegisterLabel> labels);

/// Standardized, flattened samples for `indices`; with `augment` each image
/// contributes its six variants. `groups`, when given, receives the source
/// index of every sample.
std::vector<Sample> make_samples(std::span<const SpectrogramImage> images, std::span<const RegisterLabel> labels,
                                 std::span<const std::size_t> indices, bool augment,
                                 std::vector<std::size_t>* groups = nullptr);

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  RegisterLabel label = RegisterLabel::Chest;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Text form, one `relative/path.png,<label-code>` line per entry, preceded
/// by an optional `# split_seed=<n>` header. Blank lines and other `#`
/// lines are ignored.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t split_seed = 0;

  void validate() const;
  [[nodiscard]] std::vector<RegisterLabel> labels() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads every image named by the manifest, resolving paths against `root`.
std::vector<SpectrogramImage> load_manifest_images(const DatasetManifest& manifest,
                                                   const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Synthetic register corpus

/// Timbre model for one register: a harmonic series whose partial levels
/// fall off at `slope_db_per_octave`, plus a broadband breath component.
struct RegisterTimbre {
  double f0_min_hz = 0.0;
  double f0_max_hz = 0.0;
  double slope_min_db = 0.0;  // dB per octave, negative
  double slope_max_db = 0.0;
  double breath_min = 0.0;    // noise amplitude relative to the fundamental
  double breath_max = 0.0;
};

struct SyntheticCorpusConfig {
  std::size_t per_class = 100;
  std::uint64_t seed = 7;
  double clip_seconds = 3.0;
  int sample_rate = audio::kWorkingSampleRate;
  std::array<RegisterTimbre, kNumClasses> registers = default_registers();
  double vibrato_rate_min_hz = 4.5;
  double vibrato_rate_max_hz = 6.5;
  double vibrato_depth_max_cents = 40.0;
  double peak_amplitude = 0.5;

  void validate() const;
  static std::array<RegisterTimbre, kNumClasses> default_registers();
};

/// One clip of the given register. Each (seed, label, index) triple draws
/// from its own random stream, so clips can be rendered in any order.
audio::AudioBuffer synthesize_register_clip(const SyntheticCorpusConfig& cfg, RegisterLabel label,
                                            std::size_t index);

/// Concatenates clips of the given registers; useful for exercising the
/// analyzer on register changes.
audio::AudioBuffer synthesize_register_sequence(const SyntheticCorpusConfig& cfg,
                                                std::span<const RegisterLabel> labels,
                                                std::size_t first_index = 0);

struct SyntheticCorpus {
  DatasetManifest manifest;
  std::vector<SpectrogramImage> images;  // native render, one per entry
};

/// Renders per_class clips for every register. Entries are laid out as
/// `<label-code>/<index>.png`, class-major.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& cfg,
                                          const dsp::MelRenderer& renderer);

/// Writes the images as grayscale PNGs plus `manifest.txt` under `dir`.
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace avra::dataset
