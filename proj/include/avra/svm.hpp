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
#include <vector>

#include "avra/dataset.hpp"

namespace avra::svm {

struct SvmTrainConfig {
  double c = 2.5e-6;
  int max_epochs = 1000;
  /// Stop once the spread of projected gradients falls below this.
  double tolerance = 1e-4;
  bool balanced = true;
  std::uint64_t seed = 0;
  /// Constant appended to every feature vector so the bias is learned as
  /// an ordinary (regularized) weight; the stored bias is w_bias * this.
  double bias_feature = 1.0;
  /// Solver works on feature_scale * x; 255 puts [0, 1] intensities back
  /// on the 8-bit gray-level scale C is expressed in.
  double feature_scale = 255.0;
  /// Solve on mean-centered features. The learned head is folded back to
  /// act on raw features, so only the bias term's regularization differs.
  bool center = true;
  bool shrinking = true;
  /// Folds for out-of-fold Platt calibration; below 2 calibrates on the
  /// training decision values directly.
  int calibration_folds = 3;

  void validate() const;
};

struct BinaryHead {
  std::vector<double> w;
  double b = 0.0;

  friend bool operator==(const BinaryHead&, const BinaryHead&) = default;
};

/// P(y = 1 | f) = 1 / (1 + exp(a f + b)).
struct PlattSigmoid {
  double a = 0.0;
  double b = 0.0;

  [[nodiscard]] double operator()(double f) const;
  friend bool operator==(const PlattSigmoid&, const PlattSigmoid&) = default;
};

struct SvmModel {
  std::size_t feature_dim = kFeatureDim;
  std::array<BinaryHead, kNumClasses> heads;
  std::array<PlattSigmoid, kNumClasses> calibration;

  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct SolverTrace {
  /// Dual objective 0.5 |w|^2 - sum(alpha) after each epoch.
  std::vector<double> dual_objective;
  int epochs = 0;
  double final_violation = 0.0;
  bool converged = false;
};

/// weight_c = N / (K * N_c) with K = counts.size(). Every count must be >= 1.
std::vector<double> balanced_class_weights(std::span<const std::size_t> counts);

/// Dual coordinate descent for the L2-regularized L1-hinge linear SVM
///
///   min 0.5 (|v|^2 + v_bias^2) + sum_i U_i max(0, 1 - y_i (v . z_i + v_bias * B))
///
/// over z_i = feature_scale * (x_i - mean) (mean = 0 without centering),
/// per-sample cost U_i = `upper[i]` and sign y_i = `sign[i]` in {+1, -1}.
/// The returned head acts on raw features: w = feature_scale * v and
/// b = v_bias * B - w . mean.
BinaryHead solve_binary(std::span<const dataset::Sample> samples, std::span<const double> sign,
                        std::span<const double> upper, const SvmTrainConfig& cfg,
                        SolverTrace* trace = nullptr);

/// The objective solve_binary minimizes, evaluated at a head in raw-feature
/// form (the transform is undone using `cfg` and the samples' mean).
double primal_objective(const BinaryHead& head, std::span<const dataset::Sample> samples,
                        std::span<const double> sign, std::span<const double> upper,
                        const SvmTrainConfig& cfg);

/// Per-sample signs and costs for a one-vs-rest head. With balanced
/// weighting each sample costs C * weight of its own class, the weights
/// computed over the classes present.
void one_vs_rest_problem(std::span<const dataset::Sample> samples, RegisterLabel positive,
                         const SvmTrainConfig& cfg, std::vector<double>& sign, std::vector<double>& upper);

/// One head of the one-vs-rest ensemble.
BinaryHead train_binary(std::span<const dataset::Sample> samples, RegisterLabel positive,
                        const SvmTrainConfig& cfg, SolverTrace* trace = nullptr);

/// Trains all heads, then calibrates them. `groups` (optional, one id per
/// sample) keeps related samples, such as augmented copies of one image,
/// in the same calibration fold.
SvmModel train(std::span<const dataset::Sample> samples, const SvmTrainConfig& cfg,
               std::span<const std::size_t> groups = {},
               std::array<SolverTrace, kNumClasses>* traces = nullptr);

std::array<double, kNumClasses> decision_values(const SvmModel& model, std::span<const float> x);

/// Argmax of the decision values; ties go to the lowest label code.
RegisterLabel predict(const SvmModel& model, std::span<const float> x);

/// Calibrated sigmoids renormalized to sum to one.
std::array<double, kNumClasses> predict_proba(const SvmModel& model, std::span<const float> x);

/// Platt's method: regularized-target sigmoid fit by Newton iteration with
/// backtracking.
PlattSigmoid fit_platt(std::span<const double> decision, std::span<const bool> positive);

/// Fits one sigmoid per class on held-out decision values.
SvmModel calibrate(SvmModel model, std::span<const dataset::Sample> held_out);

std::vector<std::uint8_t> serialize(const SvmModel& model);
/// `expected_dim` of 0 accepts any feature dimension.
SvmModel deserialize(std::span<const std::uint8_t> bytes, std::size_t expected_dim = kFeatureDim);
void save_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path, std::size_t expected_dim = kFeatureDim);

}  // namespace avra::svm
