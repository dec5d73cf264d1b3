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

#include "avra/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avra/error.hpp"

namespace avra::dsp {
namespace {

using cd = std::complex<double>;

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

void StftConfig::validate() const {
  if (!is_power_of_two(fft_size)) {
    throw ConfigError("fft_size must be a power of two, got " + std::to_string(fft_size));
  }
  if (hop == 0 || hop > fft_size) throw ConfigError("hop must satisfy 0 < hop <= fft_size");
}

void MelConfig::validate(int sample_rate) const {
  if (n_mels < 2) throw ConfigError("n_mels must be at least 2");
  if (!(f_min >= 0.0) || !(f_min < f_max)) throw ConfigError("need 0 <= f_min < f_max");
  if (f_max > sample_rate / 2.0) {
    throw ConfigError("f_max " + std::to_string(f_max) + " Hz exceeds Nyquist for " +
                      std::to_string(sample_rate) + " Hz");
  }
  if (!(range_db > 0.0)) throw ConfigError("range_db must be positive");
  if (!std::isfinite(gain_db)) throw ConfigError("gain_db must be finite");
}

std::vector<double> hann_window(std::size_t n) {
  if (n == 0) throw InvalidArgument("window length must be at least 1");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n)));
  }
  return w;
}

void fft_inplace(std::span<cd> x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw InvalidArgument("FFT length must be a power of two, got " + std::to_string(n));
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  // Twiddles are evaluated directly, not by repeated multiplication, so the
  // error stays at machine precision for large n.
  std::vector<double> tw_re(n / 2);
  std::vector<double> tw_im(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double theta = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw_re[k] = std::cos(theta);
    tw_im[k] = std::sin(theta);
  }
  // std::complex multiplication goes through the Annex G NaN-recovery path;
  // the butterflies are written out on raw doubles instead.
  auto* data = reinterpret_cast<double*>(x.data());
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = tw_re[k * stride];
        const double wi = tw_im[k * stride];
        double* a = data + 2 * (start + k);
        double* b = data + 2 * (start + k + half);
        const double vr = b[0] * wr - b[1] * wi;
        const double vi = b[0] * wi + b[1] * wr;
        b[0] = a[0] - vr;
        b[1] = a[1] - vi;
        a[0] += vr;
        a[1] += vi;
      }
    }
  }
}

std::vector<cd> fft(std::span<const cd> x) {
  std::vector<cd> out(x.begin(), x.end());
  fft_inplace(out);
  return out;
}

Matrix power_spectrogram(const audio::AudioBuffer& buffer, const StftConfig& cfg) {
  cfg.validate();
  if (buffer.samples.empty()) throw EmptyInput("cannot compute a spectrogram of an empty buffer");
  const std::size_t n = buffer.samples.size();
  const std::size_t pad = cfg.fft_size / 2;
  const std::size_t frames = 1 + n / cfg.hop;
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const auto window = hann_window(cfg.fft_size);

  Matrix out(frames, bins);
  std::vector<cd> frame(cfg.fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto origin = static_cast<std::ptrdiff_t>(f * cfg.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t k = 0; k < cfg.fft_size; ++k) {
      const std::size_t idx = reflect_index(origin + static_cast<std::ptrdiff_t>(k), n);
      frame[k] = cd(window[k] * buffer.samples[idx], 0.0);
    }
    fft_inplace(frame);
    double* row = &out.data[f * bins];
    for (std::size_t k = 0; k < bins; ++k) row[k] = std::norm(frame[k]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const MelConfig& cfg, std::size_t fft_size, int sample_rate) {
  cfg.validate(sample_rate);
  if (!is_power_of_two(fft_size)) throw ConfigError("fft_size must be a power of two");
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);

  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    edges[i] = mel_to_hz(m);
  }

  Matrix fb(cfg.n_mels, bins);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rising = (f - lo) / (center - lo);
      const double falling = (hi - f) / (hi - center);
      const double w = std::max(0.0, std::min(rising, falling));
      fb.at(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak <= 0.0) {
      throw ConfigError("mel band " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise fft_size");
    }
    for (std::size_t k = 0; k < bins; ++k) fb.at(m, k) /= peak;
  }
  return fb;
}

Matrix apply_filterbank(const Matrix& power, const Matrix& filterbank) {
  if (power.cols != filterbank.cols) {
    throw ShapeError("power has " + std::to_string(power.cols) + " bins, filterbank expects " +
                     std::to_string(filterbank.cols));
  }
  Matrix out(power.rows, filterbank.rows);
  for (std::size_t f = 0; f < power.rows; ++f) {
    const double* p = &power.data[f * power.cols];
    for (std::size_t m = 0; m < filterbank.rows; ++m) {
      const double* w = &filterbank.data[m * filterbank.cols];
      double acc = 0.0;
      for (std::size_t k = 0; k < power.cols; ++k) acc += w[k] * p[k];
      out.at(f, m) = acc;
    }
  }
  return out;
}

SpectrogramImage to_decibel_image(const Matrix& mel_power, const MelConfig& cfg, std::ptrdiff_t first,
                                  std::size_t count) {
  if (!(cfg.range_db > 0.0)) throw ConfigError("range_db must be positive");
  const auto rows = static_cast<std::ptrdiff_t>(mel_power.rows);
  double p_max = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    const std::ptrdiff_t f = first + static_cast<std::ptrdiff_t>(c);
    if (f < 0 || f >= rows) continue;
    for (std::size_t m = 0; m < mel_power.cols; ++m) {
      const double p = mel_power.at(static_cast<std::size_t>(f), m);
      if (!(p >= 0.0)) throw InvalidArgument("mel power must be nonnegative");
      p_max = std::max(p_max, p);
    }
  }

  SpectrogramImage img(count, mel_power.cols, 0.0F);
  if (p_max <= 0.0) return img;
  for (std::size_t c = 0; c < count; ++c) {
    const std::ptrdiff_t f = first + static_cast<std::ptrdiff_t>(c);
    if (f < 0 || f >= rows) continue;
    for (std::size_t m = 0; m < mel_power.cols; ++m) {
      const double p = mel_power.at(static_cast<std::size_t>(f), m);
      double intensity = 0.0;
      if (p > 0.0) {
        const double level = 10.0 * std::log10(p / p_max);
        const double d = std::clamp(level + cfg.gain_db, -cfg.range_db, 0.0);
        intensity = (d + cfg.range_db) / cfg.range_db;
      }
      img.at(mel_power.cols - 1 - m, c) = static_cast<float>(intensity);
    }
  }
  return img;
}

SpectrogramImage to_decibel_image(const Matrix& mel_power, const MelConfig& cfg) {
  return to_decibel_image(mel_power, cfg, 0, mel_power.rows);
}

MelRenderer::MelRenderer(StftConfig stft, MelConfig mel, int sample_rate)
    : stft_(stft), mel_(mel), sample_rate_(sample_rate) {
  stft_.validate();
  filterbank_ = mel_filterbank(mel_, stft_.fft_size, sample_rate_);
  band_begin_.resize(filterbank_.rows);
  band_end_.resize(filterbank_.rows);
  for (std::size_t m = 0; m < filterbank_.rows; ++m) {
    std::size_t b = 0;
    while (b < filterbank_.cols && filterbank_.at(m, b) == 0.0) ++b;
    std::size_t e = filterbank_.cols;
    while (e > b && filterbank_.at(m, e - 1) == 0.0) --e;
    band_begin_[m] = b;
    band_end_[m] = e;
  }
}

std::size_t MelRenderer::frames_for(std::size_t samples) const { return 1 + samples / stft_.hop; }

Matrix MelRenderer::mel_power(const audio::AudioBuffer& buffer) const {
  if (buffer.sample_rate != sample_rate_) {
    throw InvalidArgument("renderer expects " + std::to_string(sample_rate_) + " Hz audio, got " +
                          std::to_string(buffer.sample_rate));
  }
  const Matrix power = power_spectrogram(buffer, stft_);
  Matrix out(power.rows, filterbank_.rows);
  for (std::size_t f = 0; f < power.rows; ++f) {
    const double* p = &power.data[f * power.cols];
    for (std::size_t m = 0; m < filterbank_.rows; ++m) {
      const double* w = &filterbank_.data[m * filterbank_.cols];
      double acc = 0.0;
      for (std::size_t k = band_begin_[m]; k < band_end_[m]; ++k) acc += w[k] * p[k];
      out.at(f, m) = acc;
    }
  }
  return out;
}

SpectrogramImage MelRenderer::render(const audio::AudioBuffer& buffer) const {
  return to_decibel_image(mel_power(buffer), mel_);
}

SpectrogramImage render_mel_spectrogram(const audio::AudioBuffer& buffer, const StftConfig& stft,
                                        const MelConfig& mel) {
  return MelRenderer(stft, mel, buffer.sample_rate).render(buffer);
}

}  // namespace avra::dsp
