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

#include <cmath>
#include <filesystem>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "avra/error.hpp"
#include "avra/svm.hpp"
#include "doctest.h"

using namespace avra;
using namespace avra::svm;

namespace {

struct Micro {
  std::vector<dataset::Sample> samples;
  std::vector<double> sign;
  std::vector<double> upper;
};

Micro random_micro(std::uint64_t seed) {
  Rng rng(seed);
  Micro m;
  const std::size_t n = 3 + rng.below(3);
  const std::size_t dim = 1 + rng.below(2);
  for (std::size_t i = 0; i < n; ++i) {
    dataset::Sample s;
    for (std::size_t f = 0; f < dim; ++f) s.features.push_back(static_cast<float>(rng.uniform(-2.0, 2.0)));
    m.samples.push_back(s);
    m.sign.push_back(i == 0 ? 1.0 : i == 1 ? -1.0 : (rng.uniform() < 0.5 ? 1.0 : -1.0));
    m.upper.push_back(rng.uniform(0.1, 5.0));
  }
  return m;
}

/// Features in the solver's coordinates: feature_scale * (x - mean).
std::vector<std::vector<double>> solver_features(const Micro& m, const SvmTrainConfig& cfg) {
  const std::size_t dim = m.samples[0].features.size();
  std::vector<double> mean(dim, 0.0);
  if (cfg.center) {
    for (const auto& s : m.samples)
      for (std::size_t f = 0; f < dim; ++f) mean[f] += s.features[f];
    for (auto& v : mean) v /= static_cast<double>(m.samples.size());
  }
  std::vector<std::vector<double>> z;
  for (const auto& s : m.samples) {
    std::vector<double> row;
    for (std::size_t f = 0; f < dim; ++f) row.push_back(cfg.feature_scale * (s.features[f] - mean[f]));
    z.push_back(row);
  }
  return z;
}

SvmTrainConfig exact_config() {
  SvmTrainConfig cfg;
  cfg.tolerance = 1e-10;
  cfg.max_epochs = 200000;
  cfg.feature_scale = 1.0;
  cfg.center = false;
  return cfg;
}

SvmModel toy_model(std::size_t dim) {
  SvmModel m;
  m.feature_dim = dim;
  for (auto& h : m.heads) h.w.assign(dim, 0.0);
  for (auto& c : m.calibration) c = {-1.0, 0.0};
  return m;
}

}  // namespace

TEST_CASE("balanced class weights") {
  CHECK(balanced_class_weights(std::vector<std::size_t>{10, 10, 10, 10}) == std::vector<double>{1, 1, 1, 1});
  const auto w = balanced_class_weights(std::vector<std::size_t>{20, 10, 5, 5});
  CHECK(w == std::vector<double>{0.5, 1.0, 2.0, 2.0});
  CHECK(w[0] * 20 + w[1] * 10 + w[2] * 5 + w[3] * 5 == doctest::Approx(40.0));
  CHECK_THROWS_AS(balanced_class_weights(std::vector<std::size_t>{3, 0}), InvalidArgument);
}

TEST_CASE("dual coordinate descent matches the exhaustive QP oracle on micro-problems") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const Micro m = random_micro(seed);
    for (bool center : {false, true}) {
      auto cfg = exact_config();
      cfg.center = center;
      cfg.shrinking = seed % 2 == 0;
      SolverTrace trace;
      const auto head = solve_binary(m.samples, m.sign, m.upper, cfg, &trace);
      const auto best = oracle::solve_dual_exhaustive(solver_features(m, cfg), m.sign, m.upper, cfg.bias_feature);
      const double primal = primal_objective(head, m.samples, m.sign, m.upper, cfg);
      CAPTURE(seed);
      CAPTURE(center);
      // Strong duality: the primal optimum is minus the dual optimum.
      CHECK(std::abs(primal + best.objective) <= 1e-3 * std::max(1.0, std::abs(best.objective)));
      CHECK(trace.converged);
      for (std::size_t i = 1; i < trace.dual_objective.size(); ++i) {
        REQUIRE(trace.dual_objective[i] <= trace.dual_objective[i - 1] + 1e-9 * std::max(1.0, std::abs(trace.dual_objective[i - 1])));
      }
    }
  }
}

TEST_CASE("two-feature problems also agree with a primal grid search") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    Micro m = random_micro(seed);
    for (auto& s : m.samples) s.features.resize(2, 0.5F);
    const auto cfg = exact_config();
    const auto head = solve_binary(m.samples, m.sign, m.upper, cfg);
    const double primal = primal_objective(head, m.samples, m.sign, m.upper, cfg);
    const double grid = oracle::grid_primal_minimum(solver_features(m, cfg), m.sign, m.upper, cfg.bias_feature);
    CAPTURE(seed);
    CHECK(primal <= grid + 1e-6);
    CHECK(std::abs(primal - grid) <= 1e-3 * std::max(1.0, grid));
  }
}

TEST_CASE("one-dimensional three-point problem") {
  Micro m;
  for (float x : {-1.0F, 0.5F, 2.0F}) m.samples.push_back({{x}, RegisterLabel::Chest});
  m.sign = {-1.0, 1.0, 1.0};
  m.upper = {1.0, 1.0, 1.0};
  const auto cfg = exact_config();
  const auto head = solve_binary(m.samples, m.sign, m.upper, cfg);
  const auto best = oracle::solve_dual_exhaustive(solver_features(m, cfg), m.sign, m.upper, 1.0);
  CHECK(primal_objective(head, m.samples, m.sign, m.upper, cfg) == doctest::Approx(-best.objective).epsilon(1e-3));
}

TEST_CASE("separable toy set is learned exactly") {
  std::vector<dataset::Sample> s = {{{0, 0}, RegisterLabel::Mix}, {{0, 1}, RegisterLabel::Mix},
                                    {{10, 10}, RegisterLabel::Chest}, {{10, 11}, RegisterLabel::Chest}};
  auto cfg = exact_config();
  cfg.c = 100.0;
  const auto head = train_binary(s, RegisterLabel::Chest, cfg);
  for (const auto& x : s) {
    const double f = head.w[0] * x.features[0] + head.w[1] * x.features[1] + head.b;
    CHECK((f > 0) == (x.label == RegisterLabel::Chest));
  }
  std::vector<dataset::Sample> one_class(s.begin(), s.begin() + 2);
  CHECK_THROWS_AS(train_binary(one_class, RegisterLabel::Chest, cfg), DegenerateTraining);
}

TEST_CASE("duplicating every sample and halving the cost leaves the solution unchanged") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    const Micro m = random_micro(seed);
    Micro d;
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
      for (int k = 0; k < 2; ++k) {
        d.samples.push_back(m.samples[i]);
        d.sign.push_back(m.sign[i]);
        d.upper.push_back(m.upper[i] / 2);
      }
    }
    auto cfg = exact_config();
    cfg.center = true;
    const auto a = solve_binary(m.samples, m.sign, m.upper, cfg);
    const auto b = solve_binary(d.samples, d.sign, d.upper, cfg);
    CAPTURE(seed);
    for (std::size_t f = 0; f < a.w.size(); ++f) CHECK(a.w[f] == doctest::Approx(b.w[f]).epsilon(1e-3));
    CHECK(a.b == doctest::Approx(b.b).epsilon(1e-3));
  }
}

TEST_CASE("balanced weighting is insensitive to duplicating a minority class on a separable problem") {
  std::vector<dataset::Sample> base = {{{2.0F}, RegisterLabel::Chest}, {{-2.0F}, RegisterLabel::Mix},
                                       {{-3.0F}, RegisterLabel::Mix}, {{-4.0F}, RegisterLabel::Mix}};
  auto dup = base;
  dup.push_back(base[0]);
  dup.push_back(base[0]);
  auto cfg = exact_config();
  cfg.c = 1000.0;
  const auto a = train_binary(base, RegisterLabel::Chest, cfg);
  const auto b = train_binary(dup, RegisterLabel::Chest, cfg);
  CHECK(a.w[0] == doctest::Approx(b.w[0]).epsilon(1e-4));
  CHECK(a.b == doctest::Approx(b.b).epsilon(1e-4));
  // Hard-margin answer for these points: boundary at x = 0, margin 2.
  CHECK(-a.b / a.w[0] == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("decision values and prediction rules") {
  auto m = toy_model(3);
  for (std::size_t c = 0; c < 4; ++c) m.heads[c].b = static_cast<double>(c + 1);
  const std::vector<float> x{0.3F, -2.0F, 5.0F};
  CHECK(decision_values(m, x) == std::array<double, 4>{1, 2, 3, 4});

  Rng rng(17);
  for (auto& h : m.heads)
    for (auto& w : h.w) w = rng.uniform(-1, 1);
  const std::vector<float> zero(3, 0.0F);
  const auto d0 = decision_values(m, zero);
  const auto dx = decision_values(m, x);
  std::vector<float> ax;
  for (float v : x) ax.push_back(2.5F * v);
  const auto dax = decision_values(m, ax);
  for (std::size_t c = 0; c < 4; ++c) {
    double naive = m.heads[c].b;
    for (std::size_t f = 0; f < 3; ++f) naive += m.heads[c].w[f] * static_cast<double>(x[f]);
    CHECK(std::abs(dx[c] - naive) <= 1e-12 * std::max(1.0, std::abs(naive)));
    CHECK(dax[c] - d0[c] == doctest::Approx(2.5 * (dx[c] - d0[c])));
  }
  CHECK_THROWS_AS(decision_values(m, std::vector<float>(4)), ShapeError);

  auto scores = toy_model(1);
  const double b[4] = {0.1, 0.9, -0.3, -2};
  for (std::size_t c = 0; c < 4; ++c) scores.heads[c].b = b[c];
  CHECK(predict(scores, std::vector<float>{0.0F}) == RegisterLabel::Mix);
  const double tie[4] = {1, 1, 0, 0};
  for (std::size_t c = 0; c < 4; ++c) scores.heads[c].b = tie[c];
  CHECK(predict(scores, std::vector<float>{0.0F}) == RegisterLabel::Chest);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> v{static_cast<float>(rng.uniform(-3, 3)), static_cast<float>(rng.uniform(-3, 3)),
                         static_cast<float>(rng.uniform(-3, 3))};
    const auto before = predict(m, v);
    auto shifted = m;
    for (auto& h : shifted.heads) h.b += 7.0;
    auto scaled = m;
    for (auto& h : scaled.heads) {
      for (auto& w : h.w) w *= 3.0;
      h.b *= 3.0;
    }
    CHECK(predict(shifted, v) == before);
    CHECK(predict(scaled, v) == before);
  }
}

TEST_CASE("Platt calibration") {
  std::vector<double> f;
  std::array<bool, 40> pos{};
  for (int i = 0; i < 40; ++i) {
    f.push_back(i < 20 ? -1.0 - 0.05 * i : 1.0 + 0.05 * i);
    pos[i] = i >= 20;
  }
  const auto sig = fit_platt(f, pos);
  CHECK(sig.a < 0.0);
  CHECK(sig(2.0) > sig(-2.0));

  auto m = toy_model(1);
  m.calibration[0] = m.calibration[1] = {-2.0, 0.1};
  m.heads[0].b = m.heads[1].b = 0.7;
  m.heads[2].b = -0.4;
  m.heads[3].b = -1.0;
  const auto p = predict_proba(m, std::vector<float>{0.0F});
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p[0] == p[1]);

  // Raising one class's score raises its probability.
  double prev = -1.0;
  for (double b = -2.0; b <= 2.0; b += 0.5) {
    m.heads[2].b = b;
    const double q = predict_proba(m, std::vector<float>{0.0F})[2];
    CHECK(q >= prev);
    prev = q;
  }

  std::vector<dataset::Sample> one_sided(3, {{0.0F}, RegisterLabel::Chest});
  CHECK_THROWS_AS(calibrate(m, one_sided), CalibrationError);
}

TEST_CASE("model container round trip and corruption") {
  auto m = toy_model(5);
  Rng rng(3);
  for (auto& h : m.heads) {
    for (auto& w : h.w) w = rng.normal();
    h.b = rng.normal();
  }
  const auto bytes = serialize(m);
  CHECK(deserialize(bytes, 5) == m);
  CHECK(serialize(deserialize(bytes, 0)) == bytes);
  CHECK_THROWS_AS(deserialize(bytes, 6), DimensionError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad, 5), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(deserialize(version, 5), FormatError);
  CHECK_THROWS_AS(deserialize(std::span(bytes).first(bytes.size() - 3), 5), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "avra_svm_test.model";
  save_model(path, m);
  CHECK(load_model(path, 5) == m);
  std::filesystem::remove(path);
}

TEST_CASE("training on a small synthetic corpus is deterministic") {
  const auto& c = fixture::corpus(6);
  const auto idx = fixture::all_indices(c);
  const auto s = fixture::samples(c, idx, false);
  SvmTrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.calibration_folds = 0;
  std::array<SolverTrace, 4> traces;
  const auto a = train(s, cfg, {}, &traces);
  const auto b = train(s, cfg);
  CHECK(a == b);
  std::size_t correct = 0;
  for (const auto& x : s) correct += predict(a, x.features) == x.label;
  CHECK(correct == s.size());
  for (const auto& t : traces) {
    for (std::size_t i = 1; i < t.dual_objective.size(); ++i)
      REQUIRE(t.dual_objective[i] <= t.dual_objective[i - 1] + 1e-9 * std::max(1.0, std::abs(t.dual_objective[i - 1])));
  }
}
