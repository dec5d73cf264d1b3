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
#include <span>
#include <string>

#include "avra/cnn.hpp"
#include "avra/dataset.hpp"

namespace avra::eval {

/// Rows are actual labels, columns predicted labels.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  [[nodiscard]] std::uint64_t total() const;
  [[nodiscard]] std::uint64_t row_sum(std::size_t actual) const;
  [[nodiscard]] std::uint64_t col_sum(std::size_t predicted) const;
  [[nodiscard]] std::uint64_t trace() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const RegisterLabel> actual, std::span<const RegisterLabel> predicted);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when the value was defined as 0 because its denominator vanished.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  std::uint64_t support = 0;
};

struct EvalReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
};

EvalReport metrics(const ConfusionMatrix& cm);

/// Class / Precision / Recall / F1-score table with an accuracy row, two
/// decimals.
std::string format_table(const EvalReport& report);

/// One `key=value` line per metric at full precision, for diffing.
std::string format_key_values(const EvalReport& report);

std::string format_confusion(const ConfusionMatrix& cm);

/// Epoch / Train loss (mean, min, max) / Val loss / Val accuracy table.
std::string format_epoch_table(std::span<const cnn::EpochStats> epochs);

}  // namespace avra::eval
