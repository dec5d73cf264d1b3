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

#include "avra/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "avra/error.hpp"
#include "avra/model_io.hpp"

namespace avra::analyzer {
namespace {

constexpr std::size_t kGlyphScale = 2;
constexpr std::size_t kGlyphCols = 3;
constexpr std::size_t kGlyphRows = 5;
constexpr std::size_t kBottomMargin = 1;

// 3x5 bitmaps for the label codes, one row per entry, bit 2 = leftmost.
constexpr std::uint8_t kDigits[kNumClasses][kGlyphRows] = {
    {0b111, 0b101, 0b101, 0b101, 0b111},
    {0b010, 0b110, 0b010, 0b010, 0b111},
    {0b111, 0b001, 0b111, 0b100, 0b111},
    {0b111, 0b001, 0b111, 0b001, 0b111},
};

Classification from_probabilities(RegisterLabel label, const std::array<double, kNumClasses>& p) {
  return {label, p[static_cast<std::size_t>(label)], p};
}

}  // namespace

Classification SvmClassifier::classify(std::span<const float> standardized) const {
  return from_probabilities(svm::predict(model_, standardized), svm::predict_proba(model_, standardized));
}

Classification CnnClassifier::classify(std::span<const float> standardized) const {
  const auto p = cnn::predict_proba(model_, standardized);
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  return from_probabilities(static_cast<RegisterLabel>(best), p);
}

std::unique_ptr<RegisterClassifier> load_classifier(const std::filesystem::path& path) {
  switch (model_io::peek_type_file(path)) {
    case model_io::ModelType::Svm:
      return std::make_unique<SvmClassifier>(svm::load_model(path));
    case model_io::ModelType::Cnn:
      return std::make_unique<CnnClassifier>(cnn::load_model(path));
  }
  throw FormatError("unknown model type in " + path.string());
}

std::size_t AnalyzerConfig::resolved_window(const dsp::MelRenderer& renderer) const {
  if (window_columns != 0) return window_columns;
  clip.validate();
  return renderer.frames_for(clip.clip_samples(renderer.sample_rate()));
}

audio::AudioBuffer cut_selection(const audio::AudioBuffer& buffer, double start_s, double end_s) {
  const double duration = buffer.duration_seconds();
  if (!std::isfinite(start_s) || !std::isfinite(end_s)) throw SelectionError("selection bounds must be finite");
  // Half a sample of slack absorbs rounding in client-side durations.
  const double slack = 0.5 / static_cast<double>(std::max(buffer.sample_rate, 1));
  if (start_s < 0.0 || start_s >= end_s || end_s > duration + slack) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "selection [%.6f, %.6f) s is not inside [0, %.6f] s", start_s, end_s, duration);
    throw SelectionError(msg);
  }
  const auto n = buffer.samples.size();
  const auto first = std::min<std::size_t>(static_cast<std::size_t>(std::llround(start_s * buffer.sample_rate)), n);
  const auto last = std::min<std::size_t>(static_cast<std::size_t>(std::llround(end_s * buffer.sample_rate)), n);
  if (last <= first) throw SelectionError("selection contains no samples");
  audio::AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  out.samples.assign(buffer.samples.begin() + static_cast<std::ptrdiff_t>(first),
                     buffer.samples.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

std::vector<std::size_t> shift_markers(std::span<const Tick> ticks) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < ticks.size(); ++i) {
    if (ticks[i].label != ticks[i - 1].label) out.push_back((ticks[i - 1].x + ticks[i].x) / 2);
  }
  return out;
}

AnalysisResult analyze(const audio::AudioBuffer& selection, const RegisterClassifier& model,
                       const dsp::MelRenderer& renderer, const AnalyzerConfig& cfg) {
  if (selection.samples.empty()) throw SelectionError("selection is empty");
  if (cfg.tick_spacing == 0) throw ConfigError("tick spacing must be positive");
  if (model.input_size() != kFeatureDim) {
    throw ModelError(std::string(model.kind()) + " model expects " + std::to_string(model.input_size()) +
                     " features, the analyzer produces " + std::to_string(kFeatureDim));
  }
  const audio::AudioBuffer working = selection.sample_rate == renderer.sample_rate()
                                         ? selection
                                         : audio::resample_linear(selection, renderer.sample_rate());
  if (working.samples.empty()) throw SelectionError("selection is shorter than one sample at the working rate");

  const dsp::Matrix power = renderer.mel_power(working);
  AnalysisResult result;
  result.spectrogram = dsp::to_decibel_image(power, renderer.mel());

  const std::size_t width = power.rows;
  const std::size_t window = cfg.resolved_window(renderer);
  std::ptrdiff_t cached_first = -1;
  Classification cached;
  for (std::size_t x = 0; x < width; x += cfg.tick_spacing) {
    std::ptrdiff_t first = 0;
    if (width > window) {
      const auto centered = static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(window / 2);
      first = std::clamp<std::ptrdiff_t>(centered, 0, static_cast<std::ptrdiff_t>(width - window));
    }
    if (first != cached_first) {
      const auto image = dataset::standardize(dsp::to_decibel_image(power, renderer.mel(), first, window));
      cached = model.classify(dataset::flatten(image));
      cached_first = first;
    }
    result.ticks.push_back({x, cached.label, cached.confidence});
  }
  result.shift_markers = shift_markers(result.ticks);
  return result;
}

AnalysisResult analyze(const audio::AudioBuffer& buffer, double start_s, double end_s,
                       const RegisterClassifier& model, const dsp::MelRenderer& renderer,
                       const AnalyzerConfig& cfg) {
  return analyze(cut_selection(buffer, start_s, end_s), model, renderer, cfg);
}

std::vector<LabelRun> label_run_lengths(const AnalysisResult& result) {
  std::vector<LabelRun> runs;
  for (const auto& t : result.ticks) {
    if (!runs.empty() && runs.back().label == t.label) {
      runs.back().end_x = t.x;
    } else {
      runs.push_back({t.label, t.x, t.x});
    }
  }
  return runs;
}

GlyphBox glyph_box(std::size_t tick_x, std::size_t image_width, std::size_t image_height) {
  GlyphBox box;
  box.width = std::min(kGlyphCols * kGlyphScale, image_width);
  box.height = std::min(kGlyphRows * kGlyphScale, image_height);
  const std::size_t half = box.width / 2;
  box.left = std::min(tick_x > half ? tick_x - half : 0, image_width - box.width);
  box.top = image_height - box.height - std::min(kBottomMargin, image_height - box.height);
  return box;
}

RgbImage annotate(const AnalysisResult& result) {
  const auto& spec = result.spectrogram;
  RgbImage out = to_rgb(spec);
  if (spec.empty()) return out;
  for (std::size_t x : result.shift_markers) {
    if (x >= spec.width) continue;
    for (std::size_t row = 0; row < spec.height; ++row) out.set(row, x, 255, 0, 0);
  }
  for (const auto& t : result.ticks) {
    const GlyphBox box = glyph_box(t.x, spec.width, spec.height);
    const auto& bitmap = kDigits[static_cast<std::size_t>(t.label) % kNumClasses];
    for (std::size_t dy = 0; dy < box.height; ++dy) {
      for (std::size_t dx = 0; dx < box.width; ++dx) {
        const std::size_t gr = dy / kGlyphScale;
        const std::size_t gc = dx / kGlyphScale;
        if ((bitmap[gr] >> (kGlyphCols - 1 - gc)) & 1U) out.set(box.top + dy, box.left + dx, 0, 0, 255);
      }
    }
  }
  return out;
}

std::string format_ticks(const AnalysisResult& result) {
  std::string out;
  char line[64];
  for (const auto& t : result.ticks) {
    std::snprintf(line, sizeof line, "%zu,%d,%.6f\n", t.x, code(t.label), t.confidence);
    out += line;
  }
  return out;
}

}  // namespace avra::analyzer
