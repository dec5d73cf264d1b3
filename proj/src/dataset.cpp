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

#include "avra/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <complex>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "avra/error.hpp"
#include "avra/rng.hpp"

namespace avra {

RegisterLabel label_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumClasses)) {
    throw InvalidArgument("register label code out of range: " + std::to_string(code));
  }
  return static_cast<RegisterLabel>(code);
}

std::string_view label_name(RegisterLabel label) {
  switch (label) {
    case RegisterLabel::Chest:
      return "Chest";
    case RegisterLabel::Mix:
      return "Mix";
    case RegisterLabel::HeadMix:
      return "HeadMix";
    case RegisterLabel::Head:
      return "Head";
  }
  return "?";
}

}  // namespace avra

namespace avra::dataset {

SpectrogramImage resize_bilinear(const SpectrogramImage& image, std::size_t width, std::size_t height) {
  if (image.empty()) throw InvalidArgument("cannot resize an empty image");
  if (width == 0 || height == 0) throw InvalidArgument("target size must be nonzero");
  if (width == image.width && height == image.height) return image;

  auto source_coord = [](std::size_t dst, std::size_t dst_n, std::size_t src_n) {
    if (dst_n == 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(src_n - 1) / static_cast<double>(dst_n - 1);
  };

  SpectrogramImage out(width, height);
  for (std::size_t r = 0; r < height; ++r) {
    const double sy = source_coord(r, height, image.height);
    const auto y0 = std::min(static_cast<std::size_t>(sy), image.height - 1);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double sx = source_coord(c, width, image.width);
      const auto x0 = std::min(static_cast<std::size_t>(sx), image.width - 1);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - static_cast<double>(x0);
      const double a = image.at(y0, x0);
      const double b = image.at(y0, x1);
      const double c0 = image.at(y1, x0);
      const double d = image.at(y1, x1);
      const double top = a + fx * (b - a);
      const double bottom = c0 + fx * (d - c0);
      out.at(r, c) = static_cast<float>(top + fy * (bottom - top));
    }
  }
  return out;
}

SpectrogramImage standardize(const SpectrogramImage& image) {
  if (image.empty()) throw InvalidArgument("cannot standardize an empty image");
  if (image.width == kInputWidth && image.height == kInputHeight) return image;

  const double scale = std::min(static_cast<double>(kInputWidth) / static_cast<double>(image.width),
                                static_cast<double>(kInputHeight) / static_cast<double>(image.height));
  const auto fit = [scale](std::size_t n, std::size_t limit) {
    const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
    return std::clamp<std::size_t>(v, 1, limit);
  };
  const std::size_t w = fit(image.width, kInputWidth);
  const std::size_t h = fit(image.height, kInputHeight);
  const SpectrogramImage resized = resize_bilinear(image, w, h);

  SpectrogramImage out(kInputWidth, kInputHeight, 0.0F);
  const std::size_t left = (kInputWidth - w) / 2;
  const std::size_t top = (kInputHeight - h) / 2;
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(&resized.pixels[r * w], w, &out.pixels[(r + top) * kInputWidth + left]);
  }
  return out;
}

SpectrogramImage hflip(const SpectrogramImage& image) {
  SpectrogramImage out = image;
  for (std::size_t r = 0; r < image.height; ++r) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(r * image.width);
    std::reverse(row, row + static_cast<std::ptrdiff_t>(image.width));
  }
  return out;
}

SpectrogramImage brightness(const SpectrogramImage& image, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidArgument("brightness factor must be positive and finite");
  }
  SpectrogramImage out = image;
  if (factor == 1.0) return out;
  for (float& p : out.pixels) {
    p = static_cast<float>(std::min(1.0, static_cast<double>(p) * factor));
  }
  return out;
}

std::vector<SpectrogramImage> augment(const SpectrogramImage& image) {
  std::vector<SpectrogramImage> out;
  out.reserve(kAugmentMultiplicity);
  const SpectrogramImage flipped = hflip(image);
  for (const SpectrogramImage* base : {&image, &flipped}) {
    for (double f : kBrightnessFactors) out.push_back(brightness(*base, f));
  }
  return out;
}

std::vector<float> flatten(const SpectrogramImage& image) {
  if (image.width != kInputWidth || image.height != kInputHeight) {
    throw ShapeError("flatten expects 154x128, got " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  }
  return image.pixels;
}

SpectrogramImage unflatten(std::span<const float> features, std::size_t width, std::size_t height) {
  if (features.size() != width * height) {
    throw ShapeError("feature length " + std::to_string(features.size()) + " does not match " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  SpectrogramImage out(width, height);
  std::copy(features.begin(), features.end(), out.pixels.begin());
  return out;
}

std::array<std::size_t, kNumClasses> class_counts(std::span<const RegisterLabel> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (RegisterLabel l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

SplitIndices split_train_test(std::span<const RegisterLabel> labels, double train_fraction,
                              std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  SplitIndices split;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = members[c];
    if (idx.size() < 5) {
      throw StratificationError("class " + std::string(label_name(static_cast<RegisterLabel>(c))) + " has " +
                                std::to_string(idx.size()) + " samples; at least 5 are required");
    }
    Rng rng(derive_seed(seed, {0x5B117, c}));
    rng.shuffle(idx);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------

void DatasetManifest::validate() const {
  std::set<std::string_view> seen;
  for (const auto& e : entries) {
    if (e.path.empty()) throw FormatError("manifest entry with empty path");
    if (static_cast<std::size_t>(e.label) >= kNumClasses) throw FormatError("manifest label out of range");
    if (!seen.insert(e.path).second) throw FormatError("duplicate manifest path: " + e.path);
  }
}

std::vector<RegisterLabel> DatasetManifest::labels() const {
  std::vector<RegisterLabel> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.label);
  return out;
}

std::string format_manifest(const DatasetManifest& manifest) {
  manifest.validate();
  std::ostringstream os;
  os << "# split_seed=" << manifest.split_seed << '\n';
  for (const auto& e : manifest.entries) os << e.path << ',' << code(e.label) << '\n';
  return os.str();
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest manifest;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view key = "# split_seed=";
      if (line.starts_with(key)) {
        const auto digits = line.substr(key.size());
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), manifest.split_seed);
        if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) {
          throw FormatError("manifest line " + std::to_string(line_no) + ": bad split_seed");
        }
      }
      continue;
    }
    const std::size_t comma = line.rfind(',');
    if (comma == std::string_view::npos || comma == 0) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected `path,label`");
    }
    const auto code_text = line.substr(comma + 1);
    int value = -1;
    const auto res = std::from_chars(code_text.data(), code_text.data() + code_text.size(), value);
    if (res.ec != std::errc{} || res.ptr != code_text.data() + code_text.size() || value < 0 ||
        value >= static_cast<int>(kNumClasses)) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": label must be 0..3");
    }
    manifest.entries.push_back({std::string(line.substr(0, comma)), static_cast<RegisterLabel>(value)});
  }
  manifest.validate();
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const std::string text = format_manifest(manifest);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<SpectrogramImage> load_manifest_images(const DatasetManifest& manifest,
                                                   const std::filesystem::path& root) {
  std::vector<SpectrogramImage> images;
  images.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) images.push_back(png::read_gray(root / e.path));
  return images;
}

// ---------------------------------------------------------------------------

std::array<RegisterTimbre, kNumClasses> SyntheticCorpusConfig::default_registers() {
  // Pitch ranges overlap the way real registers do across the passaggio;
  // spectral tilt and breathiness carry most of the separation.
  return {{
      {110.0, 200.0, -4.0, -2.0, 0.001, 0.005},    // chest: low, bright
      {165.0, 280.0, -8.0, -6.0, 0.008, 0.016},    // mix
      {220.0, 350.0, -12.0, -10.0, 0.020, 0.035},  // head mix
      {260.0, 440.0, -17.0, -14.0, 0.040, 0.070},  // head: high, dark, breathy
  }};
}

void SyntheticCorpusConfig::validate() const {
  if (per_class < 1) throw ConfigError("per_class must be at least 1");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds must be positive");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (!(peak_amplitude > 0.0 && peak_amplitude <= 1.0)) throw ConfigError("peak_amplitude must lie in (0, 1]");
  if (!(vibrato_rate_min_hz <= vibrato_rate_max_hz) || vibrato_depth_max_cents < 0.0) {
    throw ConfigError("bad vibrato parameters");
  }
  for (const auto& r : registers) {
    if (!(r.f0_min_hz > 0.0 && r.f0_min_hz <= r.f0_max_hz && r.f0_max_hz < sample_rate / 2.0)) {
      throw ConfigError("bad register pitch range");
    }
    if (!(r.slope_min_db <= r.slope_max_db && r.slope_max_db <= 0.0)) {
      throw ConfigError("register spectral slope must be a nonpositive range");
    }
    if (!(r.breath_min >= 0.0 && r.breath_min <= r.breath_max)) throw ConfigError("bad breath range");
  }
}

audio::AudioBuffer synthesize_register_clip(const SyntheticCorpusConfig& cfg, RegisterLabel label,
                                            std::size_t index) {
  cfg.validate();
  const RegisterTimbre& timbre = cfg.registers[static_cast<std::size_t>(label)];
  Rng rng(derive_seed(cfg.seed, {0xC11F, static_cast<std::uint64_t>(label), index}));

  const double f0 = std::exp(rng.uniform(std::log(timbre.f0_min_hz), std::log(timbre.f0_max_hz)));
  const double slope = rng.uniform(timbre.slope_min_db, timbre.slope_max_db);
  const double breath = rng.uniform(timbre.breath_min, timbre.breath_max);
  const double vib_rate = rng.uniform(cfg.vibrato_rate_min_hz, cfg.vibrato_rate_max_hz);
  const double vib_depth = rng.uniform(0.0, cfg.vibrato_depth_max_cents) / 1200.0;
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  const double sr = cfg.sample_rate;
  const double nyquist_guard = 0.45 * sr;
  const auto max_harmonic = static_cast<std::size_t>(nyquist_guard / (f0 * std::pow(2.0, vib_depth)));
  // Partial h contributes Im(coef[h] * z^(h+1)) with z = exp(i 2 pi phase).
  std::vector<std::complex<double>> coef(max_harmonic);
  for (std::size_t h = 0; h < max_harmonic; ++h) {
    const double amp = std::pow(10.0, slope * std::log2(static_cast<double>(h + 1)) / 20.0);
    coef[h] = std::polar(amp, rng.uniform(0.0, 2.0 * std::numbers::pi));
  }

  const auto n = static_cast<std::size_t>(std::llround(cfg.clip_seconds * sr));
  const auto fade = std::min<std::size_t>(static_cast<std::size_t>(0.01 * sr), n / 2);
  audio::AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  out.samples.resize(n);
  double phase = 0.0;  // cycles of the fundamental
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double inst_f0 = f0 * std::pow(2.0, vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    const double zr = std::cos(2.0 * std::numbers::pi * phase);
    const double zi = std::sin(2.0 * std::numbers::pi * phase);
    double hr = zr;
    double hi = zi;
    double v = 0.0;
    for (std::size_t h = 0; h < max_harmonic; ++h) {
      v += coef[h].real() * hi + coef[h].imag() * hr;
      const double nr = hr * zr - hi * zi;
      hi = hr * zi + hi * zr;
      hr = nr;
    }
    v += breath * rng.normal();
    double gain = 1.0;
    if (i < fade) gain = static_cast<double>(i) / static_cast<double>(fade);
    if (n - 1 - i < fade) gain = std::min(gain, static_cast<double>(n - 1 - i) / static_cast<double>(fade));
    out.samples[i] = v * gain;
    phase += inst_f0 / sr;
    phase -= std::floor(phase);
  }

  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double k = cfg.peak_amplitude / peak;
    for (double& s : out.samples) s *= k;
  }
  return out;
}

audio::AudioBuffer synthesize_register_sequence(const SyntheticCorpusConfig& cfg,
                                                std::span<const RegisterLabel> labels,
                                                std::size_t first_index) {
  audio::AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto clip = synthesize_register_clip(cfg, labels[i], first_index + i);
    out.samples.insert(out.samples.end(), clip.samples.begin(), clip.samples.end());
  }
  return out;
}

std::vector<Sample> make_samples(std::span<const SpectrogramImage> images, std::span<const RegisterLabel> labels,
                                 std::span<const std::size_t> indices, bool augment,
                                 std::vector<std::size_t>* groups) {
  if (images.size() != labels.size()) throw ShapeError("need one label per image");
  std::vector<Sample> out;
  out.reserve(indices.size() * (augment ? kAugmentMultiplicity : 1));
  if (groups != nullptr) groups->clear();
  for (std::size_t i : indices) {
    if (i >= images.size()) throw InvalidArgument("sample index " + std::to_string(i) + " out of range");
    const SpectrogramImage base = standardize(images[i]);
    if (augment) {
      for (const auto& variant : dataset::augment(base)) {
        out.push_back({flatten(variant), labels[i]});
        if (groups != nullptr) groups->push_back(i);
      }
    } else {
      out.push_back({flatten(base), labels[i]});
      if (groups != nullptr) groups->push_back(i);
    }
  }
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& cfg, const dsp::MelRenderer& renderer) {
  cfg.validate();
  if (renderer.sample_rate() != cfg.sample_rate) {
    throw ConfigError("renderer sample rate does not match the corpus sample rate");
  }
  SyntheticCorpus corpus;
  corpus.manifest.split_seed = cfg.seed;
  corpus.manifest.entries.reserve(cfg.per_class * kNumClasses);
  corpus.images.reserve(cfg.per_class * kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto label = static_cast<RegisterLabel>(c);
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      corpus.images.push_back(renderer.render(synthesize_register_clip(cfg, label, i)));
      corpus.manifest.entries.push_back({std::to_string(c) + "/" + std::to_string(i) + ".png", label});
    }
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  for (std::size_t c = 0; c < kNumClasses; ++c) std::filesystem::create_directories(dir / std::to_string(c));
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    png::write_gray(dir / corpus.manifest.entries[i].path, corpus.images[i]);
  }
  write_manifest(dir / "manifest.txt", corpus.manifest);
}

}  // namespace avra::dataset
