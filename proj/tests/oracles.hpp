#pragma once

// Test-only reference implementations. Nothing here calls into the kernels it
// is used to check.

#include "mpox/tensor.hpp"
#include "mpox/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace mpox::oracle {

/// Direct evaluation of the windowed sum: six nested loops over
/// (n, y, x, out channel) and the (ky, kx, in channel) window.
template <typename Scalar>
Tensor<Scalar> naive_conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                            const Tensor<Scalar>& bias, Index stride, Index pad) {
  const Index n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const Index kh = weights.dim(0), kw = weights.dim(1), oc = weights.dim(3);
  const Index oh = (h - kh + 2 * pad) / stride + 1;
  const Index ow = (w - kw + 2 * pad) / stride + 1;
  Tensor<Scalar> out({n, oh, ow, oc});
  for (Index b = 0; b < n; ++b)
    for (Index y = 0; y < oh; ++y)
      for (Index x = 0; x < ow; ++x)
        for (Index o = 0; o < oc; ++o) {
          double acc = double(bias[o]);
          for (Index i = 0; i < kh; ++i)
            for (Index j = 0; j < kw; ++j)
              for (Index ch = 0; ch < c; ++ch) {
                const Index iy = y * stride + i - pad, ix = x * stride + j - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += double(input.at(b, iy, ix, ch)) *
                       double(weights[((i * kw + j) * c + ch) * oc + o]);
              }
          out.at(b, y, x, o) = Scalar(acc);
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(rng.uniform(lo, hi));
  return t;
}

/// Central difference of a scalar function with respect to each entry of
/// `values` (perturbed in place and restored).
inline std::vector<double> central_difference(const std::function<double()>& f,
                                              std::span<double> values, double h) {
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double plus = f();
    values[i] = saved - h;
    const double minus = f();
    values[i] = saved;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

/// Relative error with an absolute floor: |a - b| is accepted outright when
/// below `abs_floor`.
inline double relative_error(double a, double b, double abs_floor = 1e-6) {
  const double diff = std::abs(a - b);
  if (diff <= abs_floor) return 0.0;
  return diff / std::max(std::abs(a), std::abs(b));
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double abs_floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], numeric[i], abs_floor));
  return worst;
}

/// P(score+ > score-) + 0.5 P(score+ == score-) over all pairs.
inline double pairwise_auc(std::span<const double> scores, std::span<const int> labels,
                           int positive = 0) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != positive) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == positive) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace mpox::oracle
