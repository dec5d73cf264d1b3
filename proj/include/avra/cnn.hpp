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
#include <functional>
#include <span>
#include <vector>

#include "avra/dataset.hpp"

namespace avra::cnn {

/// Dense NCHW tensor of doubles.
struct Tensor {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : n(n), c(c), h(h), w(w), data(n * c * h * w, fill) {}

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t per_item() const { return c * h * w; }
  [[nodiscard]] bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  double& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) { return data[((i * c + ch) * h + y) * w + x]; }
  [[nodiscard]] double at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((i * c + ch) * h + y) * w + x];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// ---- Layer primitives ---------------------------------------------------

/// Cross-correlation of x (N,C,H,W) with kernel (O,C,K,K) plus per-output
/// bias, with zero padding. Output is (N, O, (H+2p-K)/s+1, (W+2p-K)/s+1).
Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, std::span<const double> bias, std::size_t stride,
                      std::size_t pad);

struct ConvGrads {
  Tensor dx;  ///< empty unless requested
  Tensor dkernel;
  std::vector<double> dbias;
};

ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy, std::size_t stride,
                          std::size_t pad, bool need_dx = true);

struct PoolResult {
  Tensor y;
  /// Flat index into x of each output's maximum.
  std::vector<std::size_t> argmax;
};

/// 2x2 max pooling, stride 2; a trailing odd row or column is dropped. The
/// first maximum in row-major window order wins ties.
PoolResult maxpool2d_forward(const Tensor& x);
Tensor maxpool2d_backward(const Tensor& dy, std::span<const std::size_t> argmax, const Tensor& x_shape);

Tensor relu(const Tensor& x);
/// Passes dy where x > 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// y = x W^T + b, with x viewed as (N, C*H*W) and weight stored (out, in, 1, 1).
Tensor dense_forward(const Tensor& x, const Tensor& weight, std::span<const double> bias);

struct DenseGrads {
  Tensor dx;
  Tensor dweight;
  std::vector<double> dbias;
};

DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& dy);

struct LossResult {
  double loss = 0.0;
  /// d loss / d logits, (softmax - onehot) / batch.
  Tensor grad;
};

/// Mean softmax cross-entropy of logits (N, K, 1, 1) against label codes.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const RegisterLabel> labels);

/// Numerically stable softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

// ---- Network --------------------------------------------------------------

struct CnnConfig {
  std::array<std::size_t, 3> channels{8, 16, 32};
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  std::size_t hidden = 128;
  std::size_t input_height = kInputHeight;
  std::size_t input_width = kInputWidth;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  int epochs = 6;
  std::uint64_t seed = 0;

  void validate() const;
  /// Spatial size after conv/pool stage `stage` (0 = input).
  [[nodiscard]] std::array<std::size_t, 2> spatial(std::size_t stage) const;
  [[nodiscard]] std::size_t flatten_dim() const;
  [[nodiscard]] bool same_architecture(const CnnConfig& o) const;
};

struct ConvLayer {
  Tensor weight;  ///< (out, in, k, k)
  std::vector<double> bias;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct DenseLayer {
  Tensor weight;  ///< (out, in, 1, 1)
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct CnnModel {
  CnnConfig config;
  std::array<ConvLayer, 3> conv;
  DenseLayer fc1;
  DenseLayer fc2;

  friend bool operator==(const CnnModel& a, const CnnModel& b) {
    return a.config.same_architecture(b.config) && a.conv == b.conv && a.fc1 == b.fc1 && a.fc2 == b.fc2;
  }
};

/// He-normal weights for every layer except the output layer, which starts
/// at zero so the initial prediction is uniform. Biases start at zero.
CnnModel init_model(const CnnConfig& cfg);

/// Every parameter array in declaration order (conv1 weight, conv1 bias, ...,
/// fc2 weight, fc2 bias).
std::vector<std::span<double>> parameters(CnnModel& model);
std::vector<std::span<const double>> parameters(const CnnModel& model);

struct ForwardCache {
  Tensor input;
  std::array<Tensor, 3> conv_in;  ///< input of each conv layer
  std::array<Tensor, 3> conv_out;  ///< pre-activation
  std::array<Tensor, 3> relu_out;
  std::array<std::vector<std::size_t>, 3> pool_argmax;
  Tensor flat;  ///< (N, flatten_dim, 1, 1)
  Tensor fc1_out;
  Tensor fc1_relu;
  Tensor logits;
};

/// Logits (N, 4, 1, 1) for a (N, 1, H, W) batch.
Tensor forward(const CnnModel& model, const Tensor& batch, ForwardCache* cache = nullptr);

/// Gradients laid out like the model's parameters.
CnnModel backward(const CnnModel& model, const ForwardCache& cache, const Tensor& dlogits);

/// Packs flattened images into a (N, 1, H, W) tensor.
Tensor make_batch(std::span<const dataset::Sample> samples, std::span<const std::size_t> order, std::size_t first,
                  std::size_t count, std::size_t height, std::size_t width);

struct EpochStats {
  int epoch = 0;
  double train_loss_mean = 0.0;
  double train_loss_min = 0.0;
  double train_loss_max = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  /// Loss of every mini-batch in training order.
  std::vector<double> batch_losses;
};

/// Mini-batch SGD with momentum. The architecture of `cfg` must match the
/// model; its optimizer fields are adopted into model.config.
TrainReport train(CnnModel& model, std::span<const dataset::Sample> train_set,
                  std::span<const dataset::Sample> validation_set, const CnnConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<RegisterLabel> predicted;
};

Evaluation evaluate(const CnnModel& model, std::span<const dataset::Sample> samples);

std::array<double, kNumClasses> predict_proba(const CnnModel& model, std::span<const float> image);
/// Argmax of the logits; ties go to the lowest label code.
RegisterLabel predict(const CnnModel& model, std::span<const float> image);

std::vector<std::uint8_t> serialize(const CnnModel& model);
/// Rejects models whose input size differs from `expected_height` x
/// `expected_width`; zero accepts any size.
CnnModel deserialize(std::span<const std::uint8_t> bytes, std::size_t expected_height = kInputHeight,
                     std::size_t expected_width = kInputWidth);
void save_model(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_model(const std::filesystem::path& path, std::size_t expected_height = kInputHeight,
                    std::size_t expected_width = kInputWidth);

}  // namespace avra::cnn
