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

#include "avra/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "avra/error.hpp"

namespace avra::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::string tag_name(const std::uint8_t* p) {
  std::string s(reinterpret_cast<const char*>(p), 4);
  for (char& c : s) {
    if (c < 0x20 || c > 0x7E) c = '?';
  }
  return s;
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FormatChunk parse_fmt(const std::uint8_t* p, std::uint32_t size) {
  if (size < 16) throw DecodeError("malformed 'fmt ' chunk: size " + std::to_string(size) + " < 16");
  FormatChunk f;
  f.format = read_u16(p);
  f.channels = read_u16(p + 2);
  f.sample_rate = read_u32(p + 4);
  f.block_align = read_u16(p + 12);
  f.bits = read_u16(p + 14);
  if (f.format == kFormatExtensible) {
    if (size < 40) throw DecodeError("malformed 'fmt ' chunk: extensible header truncated");
    // The sub-format GUID starts with the plain format code.
    f.format = read_u16(p + 24);
  }
  return f;
}

}  // namespace

void ClipSpec::validate() const {
  if (!(clip_seconds > 0.0) || !std::isfinite(clip_seconds)) {
    throw ConfigError("clip_seconds must be positive");
  }
  if (!(min_fill_fraction > 0.0 && min_fill_fraction <= 1.0)) {
    throw ConfigError("min_fill_fraction must lie in (0, 1]");
  }
}

std::size_t ClipSpec::clip_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw DecodeError("malformed 'RIFF' header: file shorter than 12 bytes");
  const std::uint8_t* base = bytes.data();
  if (std::memcmp(base, "RIFF", 4) != 0) throw DecodeError("malformed 'RIFF' header: missing RIFF tag");
  if (std::memcmp(base + 8, "WAVE", 4) != 0) throw DecodeError("malformed 'RIFF' header: missing WAVE tag");

  std::optional<FormatChunk> fmt;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = base + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size > available) throw DecodeError("malformed 'fmt ' chunk: truncated");
      fmt = parse_fmt(chunk + 8, size);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (size > available) {
        throw DecodeError("malformed 'data' chunk: declares " + std::to_string(size) + " bytes, " +
                          std::to_string(available) + " present");
      }
      data = chunk + 8;
      data_size = size;
      break;
    } else if (size > available) {
      throw DecodeError("malformed '" + tag_name(chunk) + "' chunk: truncated");
    }
    pos = body + size + (size & 1U);
  }

  if (!fmt) throw DecodeError("malformed file: missing 'fmt ' chunk");
  if (data == nullptr) throw DecodeError("malformed file: missing 'data' chunk");

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits == 16;
  const bool float32 = fmt->format == kFormatFloat && fmt->bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedFormat("unsupported WAV encoding: format code " + std::to_string(fmt->format) +
                            ", " + std::to_string(fmt->bits) + " bits");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw UnsupportedFormat("unsupported channel count " + std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) throw DecodeError("malformed 'fmt ' chunk: zero sample rate");

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  if (data_size % frame_bytes != 0) {
    throw DecodeError("malformed 'data' chunk: size is not a whole number of frames");
  }
  const std::size_t frames = data_size / frame_bytes;

  auto sample_at = [&](std::size_t frame, std::size_t channel) -> double {
    const std::uint8_t* p = data + frame * frame_bytes + channel * bytes_per_sample;
    if (pcm16) {
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    }
    const float v = std::bit_cast<float>(read_u32(p));
    if (!std::isfinite(v)) throw DecodeError("malformed 'data' chunk: non-finite float sample");
    return std::clamp(static_cast<double>(v), -1.0, 1.0);
  };

  AudioBuffer out;
  out.sample_rate = static_cast<int>(fmt->sample_rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    out.samples[i] = fmt->channels == 1 ? sample_at(i, 0)
                                        : 0.5 * (sample_at(i, 0) + sample_at(i, 1));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioBuffer& buffer) {
  if (buffer.sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : buffer.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

AudioBuffer read_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buffer) {
  const auto bytes = encode_wav_pcm16(buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

AudioBuffer resample_linear(const AudioBuffer& buffer, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("target_rate must be positive");
  if (buffer.sample_rate <= 0) throw InvalidArgument("source sample_rate must be positive");
  if (target_rate == buffer.sample_rate || buffer.samples.empty()) {
    AudioBuffer copy = buffer;
    copy.sample_rate = target_rate;
    return copy;
  }
  const std::size_t n = buffer.samples.size();
  const double ratio = static_cast<double>(target_rate) / buffer.sample_rate;
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  const double step = static_cast<double>(buffer.sample_rate) / target_rate;

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * step;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= n) {
      out.samples[j] = buffer.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    out.samples[j] = buffer.samples[i] + frac * (buffer.samples[i + 1] - buffer.samples[i]);
  }
  return out;
}

AudioBuffer load_working_audio(std::span<const std::uint8_t> wav_bytes) {
  return resample_linear(decode_wav(wav_bytes), kWorkingSampleRate);
}

std::vector<AudioBuffer> slice_clips(const AudioBuffer& buffer, const ClipSpec& spec) {
  spec.validate();
  if (buffer.samples.empty()) throw EmptyInput("cannot slice an empty buffer");
  const std::size_t clip_len = spec.clip_samples(buffer.sample_rate);
  if (clip_len == 0) throw ConfigError("clip_seconds shorter than one sample");

  std::vector<AudioBuffer> clips;
  const std::size_t n = buffer.samples.size();
  std::size_t start = 0;
  for (; start + clip_len <= n; start += clip_len) {
    AudioBuffer clip;
    clip.sample_rate = buffer.sample_rate;
    clip.samples.assign(buffer.samples.begin() + static_cast<std::ptrdiff_t>(start),
                        buffer.samples.begin() + static_cast<std::ptrdiff_t>(start + clip_len));
    clips.push_back(std::move(clip));
  }
  const std::size_t remainder = n - start;
  if (remainder > 0 &&
      static_cast<double>(remainder) / static_cast<double>(clip_len) >= spec.min_fill_fraction) {
    AudioBuffer clip;
    clip.sample_rate = buffer.sample_rate;
    clip.samples.assign(clip_len, 0.0);
    std::copy(buffer.samples.begin() + static_cast<std::ptrdiff_t>(start), buffer.samples.end(),
              clip.samples.begin());
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace avra::audio
