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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace avra::audio {

/// Canonical rate every ingested buffer is resampled to. Any rate above
/// 40 kHz keeps the 20 kHz mel ceiling below Nyquist.
inline constexpr int kWorkingSampleRate = 44100;

/// Mono audio with amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kWorkingSampleRate;

  [[nodiscard]] double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  [[nodiscard]] bool empty() const { return samples.empty(); }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

struct ClipSpec {
  double clip_seconds = 3.0;
  /// A trailing partial clip survives only if it fills at least this
  /// fraction of a full clip.
  double min_fill_fraction = 0.5;

  void validate() const;
  [[nodiscard]] std::size_t clip_samples(int sample_rate) const;
};

/// Decodes a RIFF/WAVE container holding 16-bit PCM or 32-bit float data,
/// mono or stereo. Stereo is averaged down to mono.
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

/// Canonical 16-bit PCM mono WAV. Samples are clamped to [-1, 1] and
/// scaled by 32768 with round-to-nearest (32767 at the top).
std::vector<std::uint8_t> encode_wav_pcm16(const AudioBuffer& buffer);

AudioBuffer read_wav_file(const std::filesystem::path& path);
void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buffer);

/// Linear interpolation resampler. Output length is
/// round(n * target / source); positions past the last input sample hold it.
AudioBuffer resample_linear(const AudioBuffer& buffer, int target_rate);

/// Decode then bring the result to kWorkingSampleRate.
AudioBuffer load_working_audio(std::span<const std::uint8_t> wav_bytes);

/// Non-overlapping fixed-length windows. A trailing partial window is kept
/// (zero-padded) only when its fill reaches spec.min_fill_fraction.
std::vector<AudioBuffer> slice_clips(const AudioBuffer& buffer, const ClipSpec& spec = {});

}  // namespace avra::audio
