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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "avra/audio_io.hpp"
#include "avra/image.hpp"

namespace avra::dsp {

struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;

  void validate() const;
};

struct MelConfig {
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 20000.0;
  double gain_db = 20.0;
  double range_db = 80.0;

  void validate(int sample_rate) const;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Periodic Hann window, w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(std::size_t n);

[[nodiscard]] constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Unnormalized forward DFT, iterative radix-2.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x);

/// In-place variant; `inverse` flips the twiddle sign without scaling.
void fft_inplace(std::span<std::complex<double>> x, bool inverse = false);

/// |FFT(window * frame)|^2 per frame, frames x (fft_size / 2 + 1).
/// Frames are centered: the signal is reflect-padded by fft_size / 2 on
/// both ends, giving 1 + len / hop frames.
Matrix power_spectrogram(const audio::AudioBuffer& buffer, const StftConfig& cfg = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters, n_mels x (fft_size / 2 + 1), centers uniform on the
/// HTK mel scale between f_min and f_max, each row scaled to peak 1.
Matrix mel_filterbank(const MelConfig& cfg, std::size_t fft_size, int sample_rate);

/// power (frames x bins) times filterbank^T -> frames x n_mels.
Matrix apply_filterbank(const Matrix& power, const Matrix& filterbank);

/// Maps a frames x n_mels power matrix to display intensities.
///   L = 10 log10(p / p_max), D = clamp(L + gain, -range, 0),
///   I = (D + range) / range.
/// The result is transposed so time runs left to right and the lowest band
/// is the bottom row. An all-zero matrix yields an all-zero image.
SpectrogramImage to_decibel_image(const Matrix& mel_power, const MelConfig& cfg = {});

/// Same mapping restricted to the frame range [first, first + count).
/// Frames outside the matrix are treated as silence.
SpectrogramImage to_decibel_image(const Matrix& mel_power, const MelConfig& cfg,
                                  std::ptrdiff_t first, std::size_t count);

/// Reusable STFT + filterbank pipeline for a fixed configuration.
class MelRenderer {
 public:
  explicit MelRenderer(StftConfig stft = {}, MelConfig mel = {},
                       int sample_rate = audio::kWorkingSampleRate);

  [[nodiscard]] Matrix mel_power(const audio::AudioBuffer& buffer) const;
  [[nodiscard]] SpectrogramImage render(const audio::AudioBuffer& buffer) const;

  [[nodiscard]] const StftConfig& stft() const { return stft_; }
  [[nodiscard]] const MelConfig& mel() const { return mel_; }
  [[nodiscard]] int sample_rate() const { return sample_rate_; }
  [[nodiscard]] const Matrix& filterbank() const { return filterbank_; }
  /// Frame count produced for a buffer of `samples` samples.
  [[nodiscard]] std::size_t frames_for(std::size_t samples) const;

 private:
  StftConfig stft_;
  MelConfig mel_;
  int sample_rate_;
  Matrix filterbank_;
  std::vector<std::size_t> band_begin_;
  std::vector<std::size_t> band_end_;
};

/// power_spectrogram -> filterbank -> to_decibel_image.
SpectrogramImage render_mel_spectrogram(const audio::AudioBuffer& buffer, const StftConfig& stft = {},
                                        const MelConfig& mel = {});

}  // namespace avra::dsp
