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

#include "avra/eval.hpp"

#include <cstdio>
#include <string_view>

#include "avra/error.hpp"

namespace avra::eval {
namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string name_of(std::size_t c) { return std::string(label_name(static_cast<RegisterLabel>(c))); }

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) {
    for (auto v : row) t += v;
  }
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t actual) const {
  std::uint64_t t = 0;
  for (auto v : counts.at(actual)) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t += row.at(predicted);
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) t += counts[c][c];
  return t;
}

ConfusionMatrix confusion(std::span<const RegisterLabel> actual, std::span<const RegisterLabel> predicted) {
  if (actual.size() != predicted.size()) {
    throw InvalidArgument("label sequences differ in length: " + std::to_string(actual.size()) + " actual vs " +
                          std::to_string(predicted.size()) + " predicted");
  }
  if (actual.empty()) throw InvalidArgument("cannot build a confusion matrix from empty sequences");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const auto a = static_cast<std::size_t>(actual[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (a >= kNumClasses || p >= kNumClasses) {
      throw InvalidArgument("label code out of range at position " + std::to_string(i));
    }
    ++cm.counts[a][p];
  }
  return cm;
}

EvalReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw InvalidArgument("confusion matrix is empty");
  EvalReport r;
  r.confusion = cm;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[c];
    m.support = cm.row_sum(c);
    m.precision = ratio(cm.counts[c][c], cm.col_sum(c), m.precision_undefined);
    m.recall = ratio(cm.counts[c][c], m.support, m.recall_undefined);
    m.f1_undefined = m.precision + m.recall == 0.0;
    m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    r.macro_precision += m.precision / kNumClasses;
    r.macro_recall += m.recall / kNumClasses;
    r.macro_f1 += m.f1 / kNumClasses;
  }
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  return r;
}

std::string format_table(const EvalReport& report) {
  std::string out = fmt("%-10s %9s %7s %9s\n", "Class", "Precision", "Recall", "F1-score");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[c];
    out += fmt("%-10s %9.2f %7.2f %9.2f\n", name_of(c).c_str(), m.precision, m.recall, m.f1);
  }
  out += fmt("%-10s %27.2f\n", "Accuracy", report.accuracy);
  return out;
}

std::string format_key_values(const EvalReport& report) {
  std::string out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[c];
    const std::string key = "class." + name_of(c) + ".";
    out += fmt("%sprecision=%.6f\n", key.c_str(), m.precision);
    out += fmt("%srecall=%.6f\n", key.c_str(), m.recall);
    out += fmt("%sf1=%.6f\n", key.c_str(), m.f1);
    out += fmt("%ssupport=%llu\n", key.c_str(), static_cast<unsigned long long>(m.support));
    if (m.precision_undefined) out += key + "precision_undefined=1\n";
    if (m.recall_undefined) out += key + "recall_undefined=1\n";
    if (m.f1_undefined) out += key + "f1_undefined=1\n";
  }
  out += fmt("accuracy=%.6f\n", report.accuracy);
  out += fmt("macro.precision=%.6f\n", report.macro_precision);
  out += fmt("macro.recall=%.6f\n", report.macro_recall);
  out += fmt("macro.f1=%.6f\n", report.macro_f1);
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      out += fmt("confusion.%zu.%zu=%llu\n", a, p, static_cast<unsigned long long>(report.confusion.counts[a][p]));
    }
  }
  return out;
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::string out = fmt("%-16s", "Actual\\Predicted");
  for (std::size_t c = 0; c < kNumClasses; ++c) out += fmt(" %8s", name_of(c).c_str());
  out += "\n";
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    out += fmt("%-16s", name_of(a).c_str());
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      out += fmt(" %8llu", static_cast<unsigned long long>(cm.counts[a][p]));
    }
    out += "\n";
  }
  return out;
}

std::string format_epoch_table(std::span<const cnn::EpochStats> epochs) {
  std::string out = fmt("%5s %10s %10s %10s %10s %8s\n", "Epoch", "TrainLoss", "LossMin", "LossMax", "ValLoss",
                        "ValAcc");
  for (const auto& e : epochs) {
    out += fmt("%5d %10.6f %10.6f %10.6f %10.6f %7.1f%%\n", e.epoch, e.train_loss_mean, e.train_loss_min,
               e.train_loss_max, e.val_loss, 100.0 * e.val_accuracy);
  }
  return out;
}

}  // namespace avra::eval
