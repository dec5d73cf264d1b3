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

// Slow, obviously-correct reference implementations used to check the
// optimized code paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "avra/cnn.hpp"
#include "avra/dataset.hpp"
#include "avra/eval.hpp"
#include "avra/rng.hpp"

namespace avra::oracle {

// ---- Spectral --------------------------------------------------------------

/// O(n^2) DFT with the phase reduced modulo n before the trig call.
inline std::vector<std::complex<double>> naive_dft(std::span<const std::complex<double>> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0.0L;
    long double im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t phase = (k * t) % n;
      const long double theta = -2.0L * std::numbers::pi_v<long double> * phase / n;
      const long double c = std::cos(theta);
      const long double s = std::sin(theta);
      re += x[t].real() * c - x[t].imag() * s;
      im += x[t].real() * s + x[t].imag() * c;
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

/// max_k |a_k - b_k| / max_k |b_k|.
inline double relative_error(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

inline std::vector<std::complex<double>> random_complex(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return x;
}

// ---- Convolution -----------------------------------------------------------

inline cnn::Tensor naive_conv2d(const cnn::Tensor& x, const cnn::Tensor& k, std::span<const double> bias,
                                std::size_t stride, std::size_t pad) {
  const std::size_t oh = (x.h + 2 * pad - k.h) / stride + 1;
  const std::size_t ow = (x.w + 2 * pad - k.w) / stride + 1;
  cnn::Tensor y(x.n, k.n, oh, ow);
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t o = 0; o < k.n; ++o)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
          double acc = bias[o];
          for (std::size_t ch = 0; ch < x.c; ++ch)
            for (std::size_t ky = 0; ky < k.h; ++ky)
              for (std::size_t kx = 0; kx < k.w; ++kx) {
                const auto iy = static_cast<std::ptrdiff_t>(r * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                const auto ix = static_cast<std::ptrdiff_t>(c * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(x.h) ||
                    ix >= static_cast<std::ptrdiff_t>(x.w))
                  continue;
                acc += x.at(n, ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) * k.at(o, ch, ky, kx);
              }
          y.at(n, o, r, c) = acc;
        }
  return y;
}

inline cnn::Tensor random_tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  cnn::Tensor t(n, c, h, w);
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// ---- Finite differences ----------------------------------------------------

/// Relative error with a floor on the denominator so vanishing gradients
/// are compared absolutely.
inline double grad_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst grad_error of `analytic` against central differences of `loss`
/// with respect to every entry of `params`.
inline double check_gradient(std::span<double> params, std::span<const double> analytic,
                             const std::function<double()>& loss, double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss();
    params[i] = saved - eps;
    const double down = loss();
    params[i] = saved;
    worst = std::max(worst, grad_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

/// Weighted sum of a tensor, used as a scalar loss whose gradient is `w`.
inline double weighted_sum(const cnn::Tensor& t, const cnn::Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t.data[i] * w.data[i];
  return s;
}

// ---- SVM -------------------------------------------------------------------

/// Exact minimizer of the box-constrained dual
///
///   min 0.5 a'Qa - sum(a),  0 <= a_i <= U_i,  Q_ij = y_i y_j (z_i.z_j + B^2)
///
/// by enumerating every assignment of each coordinate to {lower bound,
/// upper bound, free}, solving the free block exactly and keeping the best
/// feasible point. Only practical for a handful of points.
struct DualOptimum {
  std::vector<double> alpha;
  double objective = std::numeric_limits<double>::infinity();
};

inline DualOptimum solve_dual_exhaustive(const std::vector<std::vector<double>>& z, std::span<const double> y,
                                         std::span<const double> upper, double bias_feature) {
  const std::size_t n = z.size();
  std::vector<std::vector<double>> q(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d = bias_feature * bias_feature;
      for (std::size_t f = 0; f < z[i].size(); ++f) d += z[i][f] * z[j][f];
      q[i][j] = y[i] * y[j] * d;
    }
  const auto objective = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s -= a[i];
      for (std::size_t j = 0; j < n; ++j) s += 0.5 * a[i] * q[i][j] * a[j];
    }
    return s;
  };

  DualOptimum best;
  std::size_t assignments = 1;
  for (std::size_t i = 0; i < n; ++i) assignments *= 3;
  for (std::size_t code = 0; code < assignments; ++code) {
    std::vector<int> state(n);
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= 3) state[i] = static_cast<int>(c % 3);
    std::vector<double> a(n, 0.0);
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 1) a[i] = upper[i];
      if (state[i] == 2) free.push_back(i);
    }
    // Q_FF a_F = 1 - Q_FB a_B, by Gaussian elimination with partial pivoting.
    const std::size_t m = free.size();
    std::vector<std::vector<double>> aug(m, std::vector<double>(m + 1));
    for (std::size_t r = 0; r < m; ++r) {
      double rhs = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (state[j] != 2) rhs -= q[free[r]][j] * a[j];
      for (std::size_t s = 0; s < m; ++s) aug[r][s] = q[free[r]][free[s]];
      aug[r][m] = rhs;
    }
    bool singular = false;
    for (std::size_t col = 0; col < m && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m; ++r)
        if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
      if (std::abs(aug[piv][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(aug[piv], aug[col]);
      for (std::size_t r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = aug[r][col] / aug[col][col];
        for (std::size_t s = col; s <= m; ++s) aug[r][s] -= f * aug[col][s];
      }
    }
    if (singular) continue;
    bool feasible = true;
    for (std::size_t r = 0; r < m; ++r) {
      const double v = aug[r][m] / aug[r][r];
      if (v < -1e-12 || v > upper[free[r]] + 1e-12) feasible = false;
      a[free[r]] = std::clamp(v, 0.0, upper[free[r]]);
    }
    if (!feasible) continue;
    const double obj = objective(a);
    if (obj < best.objective) best = {a, obj};
  }
  return best;
}

/// Primal objective 0.5 (|v|^2 + v_b^2) + sum U_i max(0, 1 - y_i (v.z_i + v_b B))
/// minimized by a coarse-to-fine grid over (v, v_b), a second independent
/// oracle for two-feature problems.
inline double grid_primal_minimum(const std::vector<std::vector<double>>& z, std::span<const double> y,
                                  std::span<const double> upper, double bias_feature) {
  const auto primal = [&](double v0, double v1, double vb) {
    double s = 0.5 * (v0 * v0 + v1 * v1 + vb * vb);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double m = y[i] * (v0 * z[i][0] + v1 * z[i][1] + vb * bias_feature);
      s += upper[i] * std::max(0.0, 1.0 - m);
    }
    return s;
  };
  double c0 = 0.0, c1 = 0.0, cb = 0.0, half = 8.0;
  double best = primal(c0, c1, cb);
  for (int level = 0; level < 40; ++level) {
    const int steps = 10;
    double b0 = c0, b1 = c1, bb = cb;
    for (int i = -steps; i <= steps; ++i)
      for (int j = -steps; j <= steps; ++j)
        for (int k = -steps; k <= steps; ++k) {
          const double v0 = c0 + half * i / steps;
          const double v1 = c1 + half * j / steps;
          const double vb = cb + half * k / steps;
          const double p = primal(v0, v1, vb);
          if (p < best) {
            best = p;
            b0 = v0;
            b1 = v1;
            bb = vb;
          }
        }
    c0 = b0;
    c1 = b1;
    cb = bb;
    half *= 0.5;
  }
  return best;
}

// ---- Evaluation ------------------------------------------------------------

/// Reference test-set confusion counts (rows actual, columns predicted).
inline eval::ConfusionMatrix reference_confusion() {
  eval::ConfusionMatrix cm;
  cm.counts = {{{1216, 60, 21, 1}, {82, 1041, 21, 3}, {5, 11, 537, 1}, {4, 2, 5, 416}}};
  return cm;
}

/// Reference per-class precision / recall / F1 for those counts, plus accuracy.
struct ReferenceRow {
  double precision, recall, f1;
};
inline constexpr ReferenceRow kReferenceRows[kNumClasses] = {
    {0.93, 0.94, 0.93}, {0.93, 0.91, 0.92}, {0.92, 0.97, 0.94}, {0.99, 0.97, 0.98}};
inline constexpr double kReferenceAccuracy = 0.94;

}  // namespace avra::oracle
