#pragma once

#include "mpox/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mpox {

/// Predictions are clipped into [kBceClip, 1 - kBceClip] before the log.
inline constexpr double kBceClip = 1e-7;

template <typename Scalar>
struct LossValue {
  Scalar loss = Scalar(0);
  Tensor<Scalar> grad;  // d loss / d prediction
};

/// Mean binary cross-entropy over every prediction entry. The gradient is
/// evaluated on the clipped predictions so loss and gradient agree.
template <typename Scalar>
LossValue<Scalar> bce_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_same_shape(pred, target, "bce_loss");
  const Scalar lo = Scalar(kBceClip), hi = Scalar(1) - Scalar(kBceClip);
  const Scalar count = Scalar(pred.size());
  LossValue<Scalar> out{Scalar(0), Tensor<Scalar>(pred.shape())};
  double total = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const Scalar p = std::clamp(pred[i], lo, hi);
    const Scalar y = target[i];
    total -= double(y) * std::log(double(p)) + (1.0 - double(y)) * std::log(1.0 - double(p));
    out.grad[i] = (p - y) / (p * (Scalar(1) - p)) / count;
  }
  out.loss = Scalar(total / double(count));
  return out;
}

/// Raised when a step would consume non-finite gradients.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments per parameter plus the step counter.
template <typename Scalar>
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  std::int64_t step = 0;
};

/// Applies one Adam update in place. Moments are created lazily on the first
/// call; all gradients are checked for finiteness before any parameter moves.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step got " + std::to_string(params.size()) + " parameters and " +
                     std::to_string(grads.size()) + " gradients");
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.push_back(Tensor<Scalar>::zeros_like(*p));
      state.v.push_back(Tensor<Scalar>::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i]->shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape())
      throw ShapeError("adam_step shape mismatch at parameter " + std::to_string(i));
    if (!grads[i]->all_finite())
      throw NonFiniteGradient("non-finite gradient at parameter " + std::to_string(i) +
                              " (step " + std::to_string(state.step + 1) + ")");
  }

  ++state.step;
  const auto& h = state.hyper;
  const double t = double(state.step);
  const Scalar b1 = Scalar(h.beta1), b2 = Scalar(h.beta2);
  const Scalar c1 = Scalar(1.0 - std::pow(h.beta1, t));
  const Scalar c2 = Scalar(1.0 - std::pow(h.beta2, t));
  const Scalar lr = Scalar(h.lr), eps = Scalar(h.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i]->array();
    auto& m = state.m[i].array();
    auto& v = state.v[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[i]->array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

/// Convenience overload over a model's parameter list.
template <typename Scalar>
void adam_step(const std::vector<Parameter<Scalar>*>& params, AdamState<Scalar>& state) {
  std::vector<Tensor<Scalar>*> values;
  std::vector<const Tensor<Scalar>*> grads;
  for (auto* p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step<Scalar>(std::span<Tensor<Scalar>* const>(values),
                    std::span<const Tensor<Scalar>* const>(grads), state);
}

}  // namespace mpox
