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

#include "avra/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "avra/error.hpp"
#include "avra/image.hpp"
#include "avra/model_io.hpp"
#include "avra/rng.hpp"

namespace avra::svm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Four partial sums let the compiler vectorize without reassociation flags.
double dot(std::span<const double> w, std::span<const float> x) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= x.size(); j += 4) {
    a0 += w[j] * static_cast<double>(x[j]);
    a1 += w[j + 1] * static_cast<double>(x[j + 1]);
    a2 += w[j + 2] * static_cast<double>(x[j + 2]);
    a3 += w[j + 3] * static_cast<double>(x[j + 3]);
  }
  for (; j < x.size(); ++j) a0 += w[j] * static_cast<double>(x[j]);
  return (a0 + a1) + (a2 + a3);
}

double squared_norm(std::span<const float> x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

struct Run {
  std::size_t begin;
  std::size_t end;
};

// Maximal column ranges on which some sample differs from the first one.
// Constant columns vanish after centering.
std::vector<Run> varying_runs(std::span<const dataset::Sample> samples) {
  const auto& first = samples.front().features;
  std::vector<bool> varies(first.size(), false);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < first.size(); ++j) {
      if (s.features[j] != first[j]) varies[j] = true;
    }
  }
  std::vector<Run> runs;
  for (std::size_t j = 0; j < first.size();) {
    if (!varies[j]) {
      ++j;
      continue;
    }
    const std::size_t begin = j;
    while (j < first.size() && varies[j]) ++j;
    runs.push_back({begin, j});
  }
  return runs;
}

std::vector<double> feature_mean(std::span<const dataset::Sample> samples) {
  std::vector<double> mu(samples.front().features.size(), 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += s.features[j];
  }
  for (double& v : mu) v /= static_cast<double>(samples.size());
  return mu;
}

void check_dims(std::span<const dataset::Sample> samples) {
  if (samples.empty()) throw DegenerateTraining("no training samples");
  const std::size_t dim = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw ShapeError("training samples have inconsistent feature lengths");
  }
}

}  // namespace

void SvmTrainConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("C must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(bias_feature >= 0.0)) throw ConfigError("bias_feature must be nonnegative");
  if (!(feature_scale > 0.0) || !std::isfinite(feature_scale)) throw ConfigError("feature_scale must be positive");
}

double PlattSigmoid::operator()(double f) const {
  // Evaluated in the form that cannot overflow exp().
  const double z = a * f + b;
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

std::vector<double> balanced_class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw InvalidArgument("no classes");
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0,
                                       [](double acc, std::size_t n) { return acc + static_cast<double>(n); });
  std::vector<double> weights(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw InvalidArgument("class " + std::to_string(c) + " has zero samples");
    weights[c] = total / (static_cast<double>(counts.size()) * static_cast<double>(counts[c]));
  }
  return weights;
}

BinaryHead solve_binary(std::span<const dataset::Sample> samples, std::span<const double> sign,
                        std::span<const double> upper, const SvmTrainConfig& cfg, SolverTrace* trace) {
  cfg.validate();
  check_dims(samples);
  const std::size_t n = samples.size();
  if (sign.size() != n || upper.size() != n) throw ShapeError("sign/upper length must match the sample count");
  const bool has_pos = std::any_of(sign.begin(), sign.end(), [](double s) { return s > 0; });
  const bool has_neg = std::any_of(sign.begin(), sign.end(), [](double s) { return s < 0; });
  if (!has_pos || !has_neg) throw DegenerateTraining("binary training needs both positive and negative samples");

  const std::size_t dim = samples.front().features.size();
  const double bias = cfg.bias_feature;
  const double scale = cfg.feature_scale;
  const std::vector<double> mu = cfg.center ? feature_mean(samples) : std::vector<double>(dim, 0.0);

  // z_i = scale * (x_i - mu) is never materialized. With m = v . mu kept
  // current, v . z_i = scale * (v . x_i - m).
  double mu_sq = 0.0;
  for (double v : mu) mu_sq += v * v;
  std::vector<double> x_dot_mu(n);
  std::vector<double> qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    x_dot_mu[i] = dot(mu, samples[i].features);
    const double centered_sq = squared_norm(samples[i].features) - 2.0 * x_dot_mu[i] + mu_sq;
    qd[i] = scale * scale * std::max(centered_sq, 0.0) + bias * bias;
  }

  const std::vector<Run> runs = cfg.center ? varying_runs(samples) : std::vector<Run>{{0, dim}};
  std::vector<double> v(dim, 0.0);
  double v_bias = 0.0;
  double v_dot_mu = 0.0;
  std::vector<double> alpha(n, 0.0);

  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  std::size_t active = n;
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  Rng rng(derive_seed(cfg.seed, {0xDCD}));

  auto dual_objective = [&] {
    double norm = v_bias * v_bias;
    for (double e : v) norm += e * e;
    return 0.5 * norm - std::accumulate(alpha.begin(), alpha.end(), 0.0);
  };

  SolverTrace local;
  int epoch = 0;
  double violation = kInf;
  while (epoch < cfg.max_epochs) {
    double pg_max_new = -kInf;
    double pg_min_new = kInf;

    for (std::size_t i = active; i > 1; --i) std::swap(index[i - 1], index[rng.below(i)]);

    for (std::size_t s = 0; s < active; ++s) {
      const std::size_t i = index[s];
      const auto& x = samples[i].features;
      const double yi = sign[i];
      double vx = 0.0;
      for (const Run& r : runs) {
        vx += dot(std::span<const double>(v).subspan(r.begin, r.end - r.begin),
                  std::span<const float>(x).subspan(r.begin, r.end - r.begin));
      }
      const double g = yi * (scale * (vx - v_dot_mu) + v_bias * bias) - 1.0;

      double pg = 0.0;
      if (alpha[i] == 0.0) {
        if (cfg.shrinking && g > pg_max_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha[i] == upper[i]) {
        if (cfg.shrinking && g < pg_min_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }
      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);

      if (std::abs(pg) > 1e-12 && qd[i] > 0.0) {
        const double old = alpha[i];
        alpha[i] = std::min(std::max(old - g / qd[i], 0.0), upper[i]);
        const double delta = (alpha[i] - old) * yi;
        if (delta != 0.0) {
          const double step = delta * scale;
          for (const Run& r : runs) {
            for (std::size_t j = r.begin; j < r.end; ++j) v[j] += step * (static_cast<double>(x[j]) - mu[j]);
          }
          v_dot_mu += step * (x_dot_mu[i] - mu_sq);
          v_bias += delta * bias;
        }
      }
    }
    ++epoch;
    if (trace != nullptr) local.dual_objective.push_back(dual_objective());

    violation = active == 0 ? 0.0 : pg_max_new - pg_min_new;
    if (violation <= cfg.tolerance) {
      if (active == n) {
        local.converged = true;
        break;
      }
      // Converged on the shrunk set; verify once more on everything.
      active = n;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max_new > 0.0 ? pg_max_new : kInf;
    pg_min_old = pg_min_new < 0.0 ? pg_min_new : -kInf;
  }

  if (trace != nullptr) {
    local.epochs = epoch;
    local.final_violation = violation;
    *trace = std::move(local);
  }

  BinaryHead head;
  head.w.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) head.w[j] = scale * v[j];
  head.b = v_bias * bias - dot(head.w, mu);
  return head;
}

double primal_objective(const BinaryHead& head, std::span<const dataset::Sample> samples,
                        std::span<const double> sign, std::span<const double> upper, const SvmTrainConfig& cfg) {
  check_dims(samples);
  const std::size_t dim = samples.front().features.size();
  const std::vector<double> mu = cfg.center ? feature_mean(samples) : std::vector<double>(dim, 0.0);
  double norm = 0.0;
  for (double e : head.w) norm += (e / cfg.feature_scale) * (e / cfg.feature_scale);
  const double solver_bias = head.b + dot(head.w, mu);
  if (cfg.bias_feature > 0.0) {
    const double vb = solver_bias / cfg.bias_feature;
    norm += vb * vb;
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double margin = sign[i] * (dot(head.w, samples[i].features) + head.b);
    loss += upper[i] * std::max(0.0, 1.0 - margin);
  }
  return 0.5 * norm + loss;
}

void one_vs_rest_problem(std::span<const dataset::Sample> samples, RegisterLabel positive,
                         const SvmTrainConfig& cfg, std::vector<double>& sign, std::vector<double>& upper) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];

  std::array<double, kNumClasses> weight{};
  weight.fill(1.0);
  if (cfg.balanced) {
    std::vector<std::size_t> present;
    for (std::size_t n : counts) {
      if (n > 0) present.push_back(n);
    }
    const auto w = balanced_class_weights(present);
    for (std::size_t c = 0, k = 0; c < kNumClasses; ++c) {
      if (counts[c] > 0) weight[c] = w[k++];
    }
  }

  sign.resize(samples.size());
  upper.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sign[i] = samples[i].label == positive ? 1.0 : -1.0;
    upper[i] = cfg.c * weight[static_cast<std::size_t>(samples[i].label)];
  }
}

BinaryHead train_binary(std::span<const dataset::Sample> samples, RegisterLabel positive,
                        const SvmTrainConfig& cfg, SolverTrace* trace) {
  std::vector<double> sign;
  std::vector<double> upper;
  one_vs_rest_problem(samples, positive, cfg, sign, upper);
  SvmTrainConfig head_cfg = cfg;
  head_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(positive)});
  return solve_binary(samples, sign, upper, head_cfg, trace);
}

namespace {

std::array<BinaryHead, kNumClasses> train_heads(std::span<const dataset::Sample> samples,
                                                const SvmTrainConfig& cfg,
                                                std::array<SolverTrace, kNumClasses>* traces) {
  std::array<BinaryHead, kNumClasses> heads;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    heads[c] = train_binary(samples, static_cast<RegisterLabel>(c), cfg,
                            traces != nullptr ? &(*traces)[c] : nullptr);
  }
  return heads;
}

std::array<PlattSigmoid, kNumClasses> fit_all(const std::vector<std::array<double, kNumClasses>>& scores,
                                              std::span<const dataset::Sample> samples) {
  std::array<PlattSigmoid, kNumClasses> out;
  const std::size_t n = samples.size();
  std::vector<double> f(n);
  const auto positive = std::make_unique<bool[]>(n);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = scores[i][c];
      positive[i] = samples[i].label == static_cast<RegisterLabel>(c);
      n_pos += positive[i] ? 1 : 0;
    }
    if (n_pos == 0 || n_pos == n) {
      throw CalibrationError("calibration data for class " +
                             std::string(label_name(static_cast<RegisterLabel>(c))) + " is one-sided");
    }
    out[c] = fit_platt(f, std::span<const bool>(positive.get(), n));
  }
  return out;
}

}  // namespace

SvmModel train(std::span<const dataset::Sample> samples, const SvmTrainConfig& cfg,
               std::span<const std::size_t> groups, std::array<SolverTrace, kNumClasses>* traces) {
  cfg.validate();
  check_dims(samples);
  if (!groups.empty() && groups.size() != samples.size()) {
    throw ShapeError("groups must have one entry per sample");
  }

  SvmModel model;
  model.feature_dim = samples.front().features.size();
  model.heads = train_heads(samples, cfg, traces);

  std::vector<std::array<double, kNumClasses>> scores(samples.size());
  if (cfg.calibration_folds < 2) {
    for (std::size_t i = 0; i < samples.size(); ++i) scores[i] = decision_values(model, samples[i].features);
  } else {
    // Assign whole groups to folds round-robin in a seeded order.
    std::vector<std::size_t> group_of(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) group_of[i] = groups.empty() ? i : groups[i];
    std::vector<std::size_t> distinct = group_of;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    Rng rng(derive_seed(cfg.seed, {0xF01D}));
    rng.shuffle(distinct);
    const auto folds = static_cast<std::size_t>(cfg.calibration_folds);
    std::vector<std::size_t> fold_of(samples.size());
    std::vector<std::pair<std::size_t, std::size_t>> group_fold(distinct.size());
    for (std::size_t k = 0; k < distinct.size(); ++k) group_fold[k] = {distinct[k], k % folds};
    std::sort(group_fold.begin(), group_fold.end());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto it = std::lower_bound(group_fold.begin(), group_fold.end(), std::make_pair(group_of[i], std::size_t{0}));
      fold_of[i] = it->second;
    }

    SvmTrainConfig fold_cfg = cfg;
    for (std::size_t k = 0; k < folds; ++k) {
      std::vector<dataset::Sample> fit_part;
      std::vector<std::size_t> held;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (fold_of[i] == k) {
          held.push_back(i);
        } else {
          fit_part.push_back(samples[i]);
        }
      }
      if (held.empty()) continue;
      fold_cfg.seed = derive_seed(cfg.seed, {0xF01D, k});
      SvmModel fold_model;
      fold_model.feature_dim = model.feature_dim;
      fold_model.heads = train_heads(fit_part, fold_cfg, nullptr);
      for (std::size_t i : held) scores[i] = decision_values(fold_model, samples[i].features);
    }
  }
  model.calibration = fit_all(scores, samples);
  return model;
}

std::array<double, kNumClasses> decision_values(const SvmModel& model, std::span<const float> x) {
  if (x.size() != model.feature_dim) {
    throw ShapeError("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.feature_dim));
  }
  std::array<double, kNumClasses> out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = dot(model.heads[c].w, x) + model.heads[c].b;
  return out;
}

RegisterLabel predict(const SvmModel& model, std::span<const float> x) {
  const auto scores = decision_values(model, x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<RegisterLabel>(best);
}

std::array<double, kNumClasses> predict_proba(const SvmModel& model, std::span<const float> x) {
  const auto scores = decision_values(model, x);
  std::array<double, kNumClasses> p{};
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = model.calibration[c](scores[c]);
    total += p[c];
  }
  if (!(total > 0.0)) {
    p.fill(1.0 / kNumClasses);
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

PlattSigmoid fit_platt(std::span<const double> decision, std::span<const bool> positive) {
  const std::size_t n = decision.size();
  if (positive.size() != n) throw ShapeError("decision/positive length mismatch");
  double prior1 = 0.0;
  for (bool p : positive) prior1 += p ? 1.0 : 0.0;
  const double prior0 = static_cast<double>(n) - prior1;
  if (prior1 == 0.0 || prior0 == 0.0) throw CalibrationError("Platt fit needs positive and negative samples");

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = positive[i] ? hi_target : lo_target;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decision[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma;
    double h22 = kSigma;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decision[i] * a + b;
      double p;
      double q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decision[i] * decision[i] * d2;
      h22 += d2;
      h21 += decision[i] * d2;
      const double d1 = t[i] - p;
      g1 += decision[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return PlattSigmoid{a, b};
}

SvmModel calibrate(SvmModel model, std::span<const dataset::Sample> held_out) {
  if (held_out.empty()) throw CalibrationError("empty calibration set");
  std::vector<std::array<double, kNumClasses>> scores(held_out.size());
  for (std::size_t i = 0; i < held_out.size(); ++i) scores[i] = decision_values(model, held_out[i].features);
  model.calibration = fit_all(scores, held_out);
  return model;
}

std::vector<std::uint8_t> serialize(const SvmModel& model) {
  model_io::Writer w;
  w.header(model_io::ModelType::Svm);
  w.u32(static_cast<std::uint32_t>(model.feature_dim));
  w.u32(static_cast<std::uint32_t>(kNumClasses));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (model.heads[c].w.size() != model.feature_dim) throw ShapeError("head weight length != feature_dim");
    w.f64s(model.heads[c].w);
    w.f64(model.heads[c].b);
    w.f64(model.calibration[c].a);
    w.f64(model.calibration[c].b);
  }
  return w.take();
}

SvmModel deserialize(std::span<const std::uint8_t> bytes, std::size_t expected_dim) {
  model_io::Reader r(bytes);
  r.header(model_io::ModelType::Svm);
  SvmModel model;
  model.feature_dim = r.u32();
  const std::uint32_t classes = r.u32();
  if (classes != kNumClasses) throw FormatError("SVM file has " + std::to_string(classes) + " classes, expected 4");
  if (expected_dim != 0 && model.feature_dim != expected_dim) {
    throw DimensionError("SVM feature_dim " + std::to_string(model.feature_dim) + " does not match expected " +
                         std::to_string(expected_dim));
  }
  if (r.remaining() != kNumClasses * (model.feature_dim + 3) * 8) {
    throw FormatError("truncated model file: SVM body size does not match feature_dim");
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    model.heads[c].w.resize(model.feature_dim);
    r.f64s(model.heads[c].w);
    model.heads[c].b = r.f64();
    model.calibration[c].a = r.f64();
    model.calibration[c].b = r.f64();
  }
  r.expect_end();
  return model;
}

void save_model(const std::filesystem::path& path, const SvmModel& model) {
  write_file_bytes(path, serialize(model));
}

SvmModel load_model(const std::filesystem::path& path, std::size_t expected_dim) {
  return deserialize(read_file_bytes(path), expected_dim);
}

}  // namespace avra::svm
