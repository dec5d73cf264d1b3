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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avra/audio_io.hpp"
#include "avra/cnn.hpp"
#include "avra/dataset.hpp"
#include "avra/dsp.hpp"
#include "avra/image.hpp"
#include "avra/svm.hpp"

namespace avra::analyzer {

struct Classification {
  RegisterLabel label = RegisterLabel::Chest;
  double confidence = 0.0;
  std::array<double, kNumClasses> probabilities{};
};

/// A trained model applied to standardized 154x128 images. Implementations
/// are immutable and safe to share across threads.
class RegisterClassifier {
 public:
  virtual ~RegisterClassifier() = default;
  [[nodiscard]] virtual std::string_view kind() const = 0;
  /// Length of the flattened image the model accepts.
  [[nodiscard]] virtual std::size_t input_size() const = 0;
  [[nodiscard]] virtual Classification classify(std::span<const float> standardized) const = 0;
};

/// Confidence is the renormalized Platt probability of the predicted class.
class SvmClassifier final : public RegisterClassifier {
 public:
  explicit SvmClassifier(svm::SvmModel model) : model_(std::move(model)) {}
  [[nodiscard]] std::string_view kind() const override { return "svm"; }
  [[nodiscard]] std::size_t input_size() const override { return model_.feature_dim; }
  [[nodiscard]] Classification classify(std::span<const float> standardized) const override;
  [[nodiscard]] const svm::SvmModel& model() const { return model_; }

 private:
  svm::SvmModel model_;
};

/// Confidence is the softmax probability of the predicted class.
class CnnClassifier final : public RegisterClassifier {
 public:
  explicit CnnClassifier(cnn::CnnModel model) : model_(std::move(model)) {}
  [[nodiscard]] std::string_view kind() const override { return "cnn"; }
  [[nodiscard]] std::size_t input_size() const override {
    return model_.config.input_height * model_.config.input_width;
  }
  [[nodiscard]] Classification classify(std::span<const float> standardized) const override;
  [[nodiscard]] const cnn::CnnModel& model() const { return model_; }

 private:
  cnn::CnnModel model_;
};

/// Loads either model type, dispatching on the container's type tag.
std::unique_ptr<RegisterClassifier> load_classifier(const std::filesystem::path& path);

struct AnalyzerConfig {
  std::size_t tick_spacing = 10;
  /// Columns classified per tick; 0 means the width of one training clip.
  std::size_t window_columns = 0;
  audio::ClipSpec clip;

  [[nodiscard]] std::size_t resolved_window(const dsp::MelRenderer& renderer) const;
};

struct Tick {
  std::size_t x = 0;
  RegisterLabel label = RegisterLabel::Chest;
  double confidence = 0.0;

  friend bool operator==(const Tick&, const Tick&) = default;
};

struct AnalysisResult {
  /// Selection rendered at native column resolution.
  SpectrogramImage spectrogram;
  std::vector<Tick> ticks;
  /// Midpoints between consecutive ticks whose labels differ.
  std::vector<std::size_t> shift_markers;
};

struct LabelRun {
  RegisterLabel label = RegisterLabel::Chest;
  std::size_t start_x = 0;
  std::size_t end_x = 0;

  friend bool operator==(const LabelRun&, const LabelRun&) = default;
};

/// Ticks at x = 0, spacing, 2*spacing, ... below the spectrogram width.
/// Each tick classifies a window of native columns centered on x; windows
/// are shifted to stay inside the selection and zero-padded only when the
/// selection is narrower than a window. Loudness is normalized per window,
/// as it is for training clips.
AnalysisResult analyze(const audio::AudioBuffer& selection, const RegisterClassifier& model,
                       const dsp::MelRenderer& renderer, const AnalyzerConfig& cfg = {});

/// Analyzes [start_s, end_s) of a longer buffer.
AnalysisResult analyze(const audio::AudioBuffer& buffer, double start_s, double end_s,
                       const RegisterClassifier& model, const dsp::MelRenderer& renderer,
                       const AnalyzerConfig& cfg = {});

/// Copies [start_s, end_s) out of `buffer`; throws SelectionError unless
/// 0 <= start_s < end_s <= duration and the range holds at least one sample.
audio::AudioBuffer cut_selection(const audio::AudioBuffer& buffer, double start_s, double end_s);

/// Shift markers for a tick sequence.
std::vector<std::size_t> shift_markers(std::span<const Tick> ticks);

std::vector<LabelRun> label_run_lengths(const AnalysisResult& result);

/// Spectrogram in gray with red vertical lines at shift markers and the
/// blue label code of every tick along the bottom edge.
RgbImage annotate(const AnalysisResult& result);

/// One `x,label,confidence` line per tick.
std::string format_ticks(const AnalysisResult& result);

/// Bounding box of a tick's glyph as drawn by annotate().
struct GlyphBox {
  std::size_t left = 0;
  std::size_t top = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

GlyphBox glyph_box(std::size_t tick_x, std::size_t image_width, std::size_t image_height);

}  // namespace avra::analyzer
