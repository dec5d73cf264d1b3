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

#include "avra/cnn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "avra/error.hpp"
#include "avra/image.hpp"
#include "avra/model_io.hpp"
#include "avra/rng.hpp"

namespace avra::cnn {
namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.n) + "," + std::to_string(t.c) + "," + std::to_string(t.h) + "," +
         std::to_string(t.w) + ")";
}

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw ShapeError("kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c, double beta) {
  const auto lda = static_cast<int>(ta ? m : k);
  const auto ldb = static_cast<int>(tb ? k : n);
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, lda, b, ldb, beta, c, static_cast<int>(n));
}

// cols[(ch*K + ky)*K + kx][oy*Wo + ox] = x[ch][oy*s + ky - p][ox*s + kx - p].
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t ho, std::size_t wo, double* cols) {
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ch * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          double* out = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* src = x + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t ho, std::size_t wo, double* x) {
  std::fill(x, x + c * h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ch * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = x + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& kernel, std::size_t stride) {
  if (stride == 0) throw ShapeError("stride must be positive");
  if (kernel.c != x.c) {
    throw ShapeError("kernel " + shape_str(kernel) + " does not match input channels of " + shape_str(x));
  }
  if (kernel.h != kernel.w || kernel.h == 0) throw ShapeError("kernel must be square and nonempty");
}

std::size_t flat_dim(const Tensor& x) { return x.c * x.h * x.w; }

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, std::span<const double> bias, std::size_t stride,
                      std::size_t pad) {
  check_conv_shapes(x, kernel, stride);
  if (bias.size() != kernel.n) throw ShapeError("bias length must equal the output channel count");
  const std::size_t k = kernel.h;
  const std::size_t ho = conv_out_size(x.h, k, stride, pad);
  const std::size_t wo = conv_out_size(x.w, k, stride, pad);
  const std::size_t patch = x.c * k * k;
  Tensor y(x.n, kernel.n, ho, wo);
  std::vector<double> cols(patch * ho * wo);
  for (std::size_t i = 0; i < x.n; ++i) {
    im2col(&x.data[i * x.per_item()], x.c, x.h, x.w, k, stride, pad, ho, wo, cols.data());
    double* out = &y.data[i * y.per_item()];
    for (std::size_t o = 0; o < kernel.n; ++o) std::fill(out + o * ho * wo, out + (o + 1) * ho * wo, bias[o]);
    gemm(false, false, kernel.n, ho * wo, patch, kernel.data.data(), cols.data(), out, 1.0);
  }
  return y;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy, std::size_t stride,
                          std::size_t pad, bool need_dx) {
  check_conv_shapes(x, kernel, stride);
  const std::size_t k = kernel.h;
  const std::size_t ho = conv_out_size(x.h, k, stride, pad);
  const std::size_t wo = conv_out_size(x.w, k, stride, pad);
  if (dy.n != x.n || dy.c != kernel.n || dy.h != ho || dy.w != wo) {
    throw ShapeError("output gradient " + shape_str(dy) + " does not match the convolution output");
  }
  const std::size_t patch = x.c * k * k;
  ConvGrads g;
  g.dkernel = Tensor(kernel.n, kernel.c, k, k);
  g.dbias.assign(kernel.n, 0.0);
  if (need_dx) g.dx = Tensor(x.n, x.c, x.h, x.w);
  std::vector<double> cols(patch * ho * wo);
  std::vector<double> dcols(need_dx ? patch * ho * wo : 0);
  for (std::size_t i = 0; i < x.n; ++i) {
    const double* d = &dy.data[i * dy.per_item()];
    for (std::size_t o = 0; o < kernel.n; ++o) {
      g.dbias[o] += std::accumulate(d + o * ho * wo, d + (o + 1) * ho * wo, 0.0);
    }
    im2col(&x.data[i * x.per_item()], x.c, x.h, x.w, k, stride, pad, ho, wo, cols.data());
    gemm(false, true, kernel.n, patch, ho * wo, d, cols.data(), g.dkernel.data.data(), 1.0);
    if (need_dx) {
      gemm(true, false, patch, ho * wo, kernel.n, kernel.data.data(), d, dcols.data(), 0.0);
      col2im(dcols.data(), x.c, x.h, x.w, k, stride, pad, ho, wo, &g.dx.data[i * x.per_item()]);
    }
  }
  return g;
}

PoolResult maxpool2d_forward(const Tensor& x) {
  if (x.h < 2 || x.w < 2) throw ShapeError("max pooling needs spatial dims of at least 2, got " + shape_str(x));
  const std::size_t ho = x.h / 2;
  const std::size_t wo = x.w / 2;
  PoolResult r;
  r.y = Tensor(x.n, x.c, ho, wo);
  r.argmax.resize(r.y.size());
  std::size_t out = 0;
  for (std::size_t plane = 0; plane < x.n * x.c; ++plane) {
    const std::size_t base = plane * x.h * x.w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++out) {
        std::size_t best = base + 2 * oy * x.w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * x.w + 2 * ox + dx;
            if (x.data[idx] > x.data[best]) best = idx;
          }
        }
        r.y.data[out] = x.data[best];
        r.argmax[out] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& dy, std::span<const std::size_t> argmax, const Tensor& x_shape) {
  if (argmax.size() != dy.size()) throw ShapeError("argmax length does not match the pooled gradient");
  Tensor dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax[i]] += dy.data[i];
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::max(v, 0.0);
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  if (!x.same_shape(dy)) throw ShapeError("relu gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(x.data[i] > 0.0)) dx.data[i] = 0.0;
  }
  return dx;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, std::span<const double> bias) {
  const std::size_t in = flat_dim(x);
  if (weight.c != in || weight.h != 1 || weight.w != 1) {
    throw ShapeError("dense weight " + shape_str(weight) + " does not accept input " + shape_str(x));
  }
  if (bias.size() != weight.n) throw ShapeError("bias length must equal the dense output width");
  Tensor y(x.n, weight.n, 1, 1);
  for (std::size_t i = 0; i < x.n; ++i) std::copy(bias.begin(), bias.end(), &y.data[i * weight.n]);
  gemm(false, true, x.n, weight.n, in, x.data.data(), weight.data.data(), y.data.data(), 1.0);
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& dy) {
  const std::size_t in = flat_dim(x);
  if (weight.c != in || dy.n != x.n || dy.per_item() != weight.n) throw ShapeError("dense gradient shape mismatch");
  DenseGrads g;
  g.dweight = Tensor(weight.n, in, 1, 1);
  g.dbias.assign(weight.n, 0.0);
  g.dx = Tensor(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t o = 0; o < weight.n; ++o) g.dbias[o] += dy.data[i * weight.n + o];
  }
  gemm(true, false, weight.n, in, x.n, dy.data.data(), x.data.data(), g.dweight.data.data(), 0.0);
  gemm(false, false, x.n, in, weight.n, dy.data.data(), weight.data.data(), g.dx.data.data(), 0.0);
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const RegisterLabel> labels) {
  if (labels.size() != logits.n || logits.n == 0) throw ShapeError("need one label per logit row");
  const std::size_t k = logits.per_item();
  LossResult r;
  r.grad = Tensor(logits.n, logits.c, logits.h, logits.w);
  const double inv_n = 1.0 / static_cast<double>(logits.n);
  for (std::size_t i = 0; i < logits.n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= k) throw InvalidArgument("label code " + std::to_string(y) + " outside 0.." + std::to_string(k - 1));
    std::span<const double> row(&logits.data[i * k], k);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double log_z = top + std::log(total);
    r.loss += (log_z - row[y]) * inv_n;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - log_z);
      r.grad.data[i * k + j] = (p - (j == y ? 1.0 : 0.0)) * inv_n;
    }
  }
  return r;
}

void CnnConfig::validate() const {
  for (std::size_t ch : channels) {
    if (ch == 0) throw ConfigError("conv channel counts must be positive");
  }
  if (kernel == 0 || stride == 0) throw ConfigError("kernel and stride must be positive");
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::size_t h = input_height;
  std::size_t w = input_width;
  for (std::size_t s = 0; s < 3; ++s) {
    if (h + 2 * pad < kernel || w + 2 * pad < kernel) throw ConfigError("input too small for the kernel");
    h = (h + 2 * pad - kernel) / stride + 1;
    w = (w + 2 * pad - kernel) / stride + 1;
    if (h < 2 || w < 2) throw ConfigError("input too small for three pooling stages");
    h /= 2;
    w /= 2;
  }
}

std::array<std::size_t, 2> CnnConfig::spatial(std::size_t stage) const {
  std::size_t h = input_height;
  std::size_t w = input_width;
  for (std::size_t s = 0; s < stage; ++s) {
    h = ((h + 2 * pad - kernel) / stride + 1) / 2;
    w = ((w + 2 * pad - kernel) / stride + 1) / 2;
  }
  return {h, w};
}

std::size_t CnnConfig::flatten_dim() const {
  const auto [h, w] = spatial(3);
  return channels[2] * h * w;
}

bool CnnConfig::same_architecture(const CnnConfig& o) const {
  return channels == o.channels && kernel == o.kernel && stride == o.stride && pad == o.pad && hidden == o.hidden &&
         input_height == o.input_height && input_width == o.input_width;
}

CnnModel init_model(const CnnConfig& cfg) {
  cfg.validate();
  CnnModel m;
  m.config = cfg;
  Rng rng(derive_seed(cfg.seed, {0x1417}));
  std::size_t in_ch = 1;
  for (std::size_t l = 0; l < 3; ++l) {
    auto& layer = m.conv[l];
    layer.weight = Tensor(cfg.channels[l], in_ch, cfg.kernel, cfg.kernel);
    const double sd = std::sqrt(2.0 / static_cast<double>(in_ch * cfg.kernel * cfg.kernel));
    for (double& v : layer.weight.data) v = sd * rng.normal();
    layer.bias.assign(cfg.channels[l], 0.0);
    in_ch = cfg.channels[l];
  }
  const std::size_t flat = cfg.flatten_dim();
  m.fc1.weight = Tensor(cfg.hidden, flat, 1, 1);
  const double sd = std::sqrt(2.0 / static_cast<double>(flat));
  for (double& v : m.fc1.weight.data) v = sd * rng.normal();
  m.fc1.bias.assign(cfg.hidden, 0.0);
  m.fc2.weight = Tensor(kNumClasses, cfg.hidden, 1, 1);
  m.fc2.bias.assign(kNumClasses, 0.0);
  return m;
}

std::vector<std::span<double>> parameters(CnnModel& model) {
  std::vector<std::span<double>> out;
  for (auto& layer : model.conv) {
    out.emplace_back(layer.weight.data);
    out.emplace_back(layer.bias);
  }
  out.emplace_back(model.fc1.weight.data);
  out.emplace_back(model.fc1.bias);
  out.emplace_back(model.fc2.weight.data);
  out.emplace_back(model.fc2.bias);
  return out;
}

std::vector<std::span<const double>> parameters(const CnnModel& model) {
  std::vector<std::span<const double>> out;
  for (const auto& span : parameters(const_cast<CnnModel&>(model))) out.emplace_back(span);
  return out;
}

Tensor forward(const CnnModel& model, const Tensor& batch, ForwardCache* cache) {
  const auto& cfg = model.config;
  if (batch.c != 1 || batch.h != cfg.input_height || batch.w != cfg.input_width) {
    throw ShapeError("network expects (N,1," + std::to_string(cfg.input_height) + "," +
                     std::to_string(cfg.input_width) + ") input, got " + shape_str(batch));
  }
  Tensor x = batch;
  for (std::size_t l = 0; l < 3; ++l) {
    Tensor z = conv2d_forward(x, model.conv[l].weight, model.conv[l].bias, cfg.stride, cfg.pad);
    Tensor a = relu(z);
    PoolResult p = maxpool2d_forward(a);
    if (cache != nullptr) {
      cache->conv_in[l] = std::move(x);
      cache->conv_out[l] = std::move(z);
      cache->relu_out[l] = std::move(a);
      cache->pool_argmax[l] = std::move(p.argmax);
    }
    x = std::move(p.y);
  }
  Tensor flat = std::move(x);
  flat.c = flat.per_item();
  flat.h = 1;
  flat.w = 1;
  Tensor h = dense_forward(flat, model.fc1.weight, model.fc1.bias);
  Tensor hr = relu(h);
  Tensor logits = dense_forward(hr, model.fc2.weight, model.fc2.bias);
  if (cache != nullptr) {
    cache->input = batch;
    cache->flat = std::move(flat);
    cache->fc1_out = std::move(h);
    cache->fc1_relu = std::move(hr);
    cache->logits = logits;
  }
  return logits;
}

CnnModel backward(const CnnModel& model, const ForwardCache& cache, const Tensor& dlogits) {
  const auto& cfg = model.config;
  CnnModel grads;
  grads.config = cfg;

  DenseGrads g2 = dense_backward(cache.fc1_relu, model.fc2.weight, dlogits);
  grads.fc2.weight = std::move(g2.dweight);
  grads.fc2.bias = std::move(g2.dbias);
  Tensor dh = relu_backward(cache.fc1_out, g2.dx);
  DenseGrads g1 = dense_backward(cache.flat, model.fc1.weight, dh);
  grads.fc1.weight = std::move(g1.dweight);
  grads.fc1.bias = std::move(g1.dbias);

  Tensor d = std::move(g1.dx);
  for (std::size_t l = 3; l-- > 0;) {
    const Tensor& a = cache.relu_out[l];
    d.c = cfg.channels[l];
    d.h = a.h / 2;
    d.w = a.w / 2;
    Tensor da = maxpool2d_backward(d, cache.pool_argmax[l], a);
    Tensor dz = relu_backward(cache.conv_out[l], da);
    ConvGrads gc = conv2d_backward(cache.conv_in[l], model.conv[l].weight, dz, cfg.stride, cfg.pad, l > 0);
    grads.conv[l].weight = std::move(gc.dkernel);
    grads.conv[l].bias = std::move(gc.dbias);
    d = std::move(gc.dx);
  }
  return grads;
}

Tensor make_batch(std::span<const dataset::Sample> samples, std::span<const std::size_t> order, std::size_t first,
                  std::size_t count, std::size_t height, std::size_t width) {
  Tensor t(count, 1, height, width);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& f = samples[order[first + i]].features;
    if (f.size() != height * width) {
      throw ShapeError("image has " + std::to_string(f.size()) + " pixels, network expects " +
                       std::to_string(height * width));
    }
    std::copy(f.begin(), f.end(), &t.data[i * height * width]);
  }
  return t;
}

Evaluation evaluate(const CnnModel& model, std::span<const dataset::Sample> samples) {
  Evaluation ev;
  if (samples.empty()) return ev;
  const auto& cfg = model.config;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t first = 0; first < samples.size(); first += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, samples.size() - first);
    const Tensor logits =
        forward(model, make_batch(samples, order, first, count, cfg.input_height, cfg.input_width));
    std::vector<RegisterLabel> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = samples[first + i].label;
    loss_sum += softmax_cross_entropy(logits, labels).loss * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double* row = &logits.data[i * kNumClasses];
      const auto best = static_cast<std::size_t>(std::max_element(row, row + kNumClasses) - row);
      ev.predicted.push_back(static_cast<RegisterLabel>(best));
      if (ev.predicted.back() == labels[i]) ++correct;
    }
  }
  ev.loss = loss_sum / static_cast<double>(samples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return ev;
}

TrainReport train(CnnModel& model, std::span<const dataset::Sample> train_set,
                  std::span<const dataset::Sample> validation_set, const CnnConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  if (!cfg.same_architecture(model.config)) throw ConfigError("training config does not match the model architecture");
  if (train_set.empty()) throw InvalidArgument("empty training set");
  if (validation_set.empty()) throw InvalidArgument("empty validation set");
  model.config = cfg;

  auto params = parameters(model);
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.size(), 0.0);

  TrainReport report;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {0x5EED, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss_min = std::numeric_limits<double>::infinity();
    stats.train_loss_max = -std::numeric_limits<double>::infinity();
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      const Tensor batch = make_batch(train_set, order, first, count, cfg.input_height, cfg.input_width);
      std::vector<RegisterLabel> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = train_set[order[first + i]].label;

      ForwardCache cache;
      const Tensor logits = forward(model, batch, &cache);
      LossResult lr = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lr.loss)) {
        throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch));
      }
      CnnModel grads = backward(model, cache, lr.grad);
      const auto gparams = parameters(grads);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& vel = velocity[p];
        for (std::size_t j = 0; j < vel.size(); ++j) {
          vel[j] = cfg.momentum * vel[j] + gparams[p][j];
          params[p][j] -= cfg.learning_rate * vel[j];
        }
      }
      report.batch_losses.push_back(lr.loss);
      loss_sum += lr.loss;
      stats.train_loss_min = std::min(stats.train_loss_min, lr.loss);
      stats.train_loss_max = std::max(stats.train_loss_max, lr.loss);
      ++batches;
    }
    stats.train_loss_mean = loss_sum / static_cast<double>(batches);
    const Evaluation ev = evaluate(model, validation_set);
    if (!std::isfinite(ev.loss)) throw TrainingError("non-finite validation loss in epoch " + std::to_string(epoch));
    stats.val_loss = ev.loss;
    stats.val_accuracy = ev.accuracy;
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return report;
}

std::array<double, kNumClasses> predict_proba(const CnnModel& model, std::span<const float> image) {
  const auto& cfg = model.config;
  if (image.size() != cfg.input_height * cfg.input_width) {
    throw ShapeError("image has " + std::to_string(image.size()) + " pixels, network expects " +
                     std::to_string(cfg.input_height * cfg.input_width));
  }
  Tensor x(1, 1, cfg.input_height, cfg.input_width);
  std::copy(image.begin(), image.end(), x.data.begin());
  const Tensor logits = forward(model, x);
  const auto p = softmax(logits.data);
  std::array<double, kNumClasses> out{};
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

RegisterLabel predict(const CnnModel& model, std::span<const float> image) {
  const auto& cfg = model.config;
  if (image.size() != cfg.input_height * cfg.input_width) {
    throw ShapeError("image has " + std::to_string(image.size()) + " pixels, network expects " +
                     std::to_string(cfg.input_height * cfg.input_width));
  }
  Tensor x(1, 1, cfg.input_height, cfg.input_width);
  std::copy(image.begin(), image.end(), x.data.begin());
  const Tensor logits = forward(model, x);
  const auto best = std::max_element(logits.data.begin(), logits.data.end()) - logits.data.begin();
  return static_cast<RegisterLabel>(best);
}

namespace {

constexpr std::uint8_t kConvKind = 1;
constexpr std::uint8_t kDenseKind = 2;

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xFFFFFFFFu) throw FormatError("dimension too large for the model container");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize(const CnnModel& model) {
  const auto& cfg = model.config;
  model_io::Writer w;
  w.header(model_io::ModelType::Cnn);
  w.u32(checked_u32(cfg.input_height));
  w.u32(checked_u32(cfg.input_width));
  w.u32(5);
  for (const auto& layer : model.conv) {
    w.u8(kConvKind);
    w.u32(checked_u32(layer.weight.n));
    w.u32(checked_u32(layer.weight.c));
    w.u32(checked_u32(layer.weight.h));
    w.u32(checked_u32(cfg.stride));
    w.u32(checked_u32(cfg.pad));
  }
  for (const auto* layer : {&model.fc1, &model.fc2}) {
    w.u8(kDenseKind);
    w.u32(checked_u32(layer->weight.n));
    w.u32(checked_u32(layer->weight.c));
    w.u32(1);
    w.u32(1);
    w.u32(0);
  }
  w.f64(cfg.learning_rate);
  w.f64(cfg.momentum);
  w.u32(checked_u32(cfg.batch_size));
  w.u32(static_cast<std::uint32_t>(cfg.epochs));
  w.u64(cfg.seed);
  for (const auto& p : parameters(model)) w.f64s(p);
  return w.take();
}

CnnModel deserialize(std::span<const std::uint8_t> bytes, std::size_t expected_height, std::size_t expected_width) {
  model_io::Reader r(bytes);
  r.header(model_io::ModelType::Cnn);
  CnnConfig cfg;
  cfg.input_height = r.u32();
  cfg.input_width = r.u32();
  if ((expected_height != 0 && cfg.input_height != expected_height) ||
      (expected_width != 0 && cfg.input_width != expected_width)) {
    throw DimensionError("model input is " + std::to_string(cfg.input_height) + "x" +
                         std::to_string(cfg.input_width) + ", expected " + std::to_string(expected_height) + "x" +
                         std::to_string(expected_width));
  }
  if (r.u32() != 5) throw FormatError("unsupported layer count in CNN manifest");
  std::size_t in_ch = 1;
  for (std::size_t l = 0; l < 3; ++l) {
    if (r.u8() != kConvKind) throw FormatError("layer " + std::to_string(l) + " should be convolutional");
    cfg.channels[l] = r.u32();
    if (r.u32() != in_ch) throw FormatError("conv layer " + std::to_string(l) + " input channels do not chain");
    const std::size_t k = r.u32();
    const std::size_t stride = r.u32();
    const std::size_t pad = r.u32();
    if (l == 0) {
      cfg.kernel = k;
      cfg.stride = stride;
      cfg.pad = pad;
    } else if (k != cfg.kernel || stride != cfg.stride || pad != cfg.pad) {
      throw FormatError("conv layers must share kernel, stride and padding");
    }
    in_ch = cfg.channels[l];
  }
  if (r.u8() != kDenseKind) throw FormatError("layer 3 should be dense");
  cfg.hidden = r.u32();
  const std::size_t fc1_in = r.u32();
  r.u32();
  r.u32();
  r.u32();
  if (r.u8() != kDenseKind) throw FormatError("layer 4 should be dense");
  const std::size_t outputs = r.u32();
  const std::size_t fc2_in = r.u32();
  r.u32();
  r.u32();
  r.u32();
  cfg.learning_rate = r.f64();
  cfg.momentum = r.f64();
  cfg.batch_size = r.u32();
  cfg.epochs = static_cast<int>(r.u32());
  cfg.seed = r.u64();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid CNN manifest: ") + e.what());
  }
  if (fc1_in != cfg.flatten_dim() || fc2_in != cfg.hidden || outputs != kNumClasses) {
    throw FormatError("dense layer shapes do not match the convolutional stack");
  }

  CnnModel m;
  m.config = cfg;
  in_ch = 1;
  for (std::size_t l = 0; l < 3; ++l) {
    m.conv[l].weight = Tensor(cfg.channels[l], in_ch, cfg.kernel, cfg.kernel);
    m.conv[l].bias.assign(cfg.channels[l], 0.0);
    in_ch = cfg.channels[l];
  }
  m.fc1.weight = Tensor(cfg.hidden, fc1_in, 1, 1);
  m.fc1.bias.assign(cfg.hidden, 0.0);
  m.fc2.weight = Tensor(kNumClasses, cfg.hidden, 1, 1);
  m.fc2.bias.assign(kNumClasses, 0.0);
  for (auto p : parameters(m)) {
    if (r.remaining() < 8 * p.size()) throw FormatError("truncated model file: parameter block incomplete");
    r.f64s(p);
  }
  r.expect_end();
  return m;
}

void save_model(const std::filesystem::path& path, const CnnModel& model) { write_file_bytes(path, serialize(model)); }

CnnModel load_model(const std::filesystem::path& path, std::size_t expected_height, std::size_t expected_width) {
  return deserialize(read_file_bytes(path), expected_height, expected_width);
}

}  // namespace avra::cnn
