#pragma once

#include "mpox/kernels.hpp"
#include "mpox/rng.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mpox {

enum class Mode { kTrain, kEval };
enum class Activation { kLinear, kRelu, kSigmoid };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

// Elementwise activations ---------------------------------------------------

/// max(x, 0).
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  y.array() = x.array().max(Scalar(0));
  return y;
}

/// Passes the upstream gradient where x >= 0, so the subgradient at 0 is 1.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  detail::check_same_shape(x, grad_out, "relu_backward");
  Tensor<Scalar> g(x.shape());
  g.array() = (x.array() >= Scalar(0)).select(grad_out.array(), Scalar(0));
  return g;
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  for (Index i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

/// Takes the forward *output* s and multiplies upstream by s(1 - s).
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& s, const Tensor<Scalar>& grad_out) {
  detail::check_same_shape(s, grad_out, "sigmoid_backward");
  Tensor<Scalar> g(s.shape());
  g.array() = grad_out.array() * s.array() * (Scalar(1) - s.array());
  return g;
}

template <typename Scalar>
Tensor<Scalar> apply_activation(const Tensor<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(z);
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kLinear: break;
  }
  return z;
}

// `z` is the pre-activation, `y` the activation output.
template <typename Scalar>
Tensor<Scalar> activation_backward(const Tensor<Scalar>& z, const Tensor<Scalar>& y,
                                   const Tensor<Scalar>& grad_out, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu_backward(z, grad_out);
    case Activation::kSigmoid: return sigmoid_backward(y, grad_out);
    case Activation::kLinear: break;
  }
  return grad_out;
}

// Dense ---------------------------------------------------------------------

/// Y = xW + b, no activation.
template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights,
                             const Tensor<Scalar>& bias) {
  if (x.rank() != 2) throw ShapeError("dense input must be rank 2 [N, d]");
  if (x.dim(1) != weights.dim(0))
    throw ShapeError("dense input width " + std::to_string(x.dim(1)) +
                     " does not match weight rows " + std::to_string(weights.dim(0)));
  if (bias.size() != weights.dim(1))
    throw ShapeError("dense bias has " + std::to_string(bias.size()) + " entries, expected " +
                     std::to_string(weights.dim(1)));
  Tensor<Scalar> y = matmul(x, weights);
  y.matrix().rowwise() +=
      Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(bias.data(), bias.size());
  return y;
}

template <typename Scalar>
struct DenseGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGradients<Scalar> dense_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights,
                                      const Tensor<Scalar>& grad_out) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) || grad_out.dim(1) != weights.dim(1))
    throw ShapeError("dense grad_out shape " + shape_to_string(grad_out.shape()) +
                     " does not match forward output");
  DenseGradients<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(weights.shape()),
                           sum_rows(grad_out)};
  g.input.matrix().noalias() = grad_out.matrix() * weights.matrix().transpose();
  g.weights.matrix().noalias() = x.matrix().transpose() * grad_out.matrix();
  return g;
}

// Batch normalization -------------------------------------------------------

/// Per-channel normalization over every axis but the last: N*H*W for NHWC
/// input, N for [N, features].
template <typename Scalar>
struct BatchNormParams {
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
  Scalar momentum = Scalar(0.9);
  Scalar epsilon = Scalar(1e-5);

  explicit BatchNormParams(Index channels = 1)
      : gamma(Tensor<Scalar>::ones({channels})),
        beta({channels}),
        running_mean({channels}),
        running_var(Tensor<Scalar>::ones({channels})) {}
};

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;  // x-hat
  ArrayX<Scalar> inv_std;
  Mode mode = Mode::kEval;
};

template <typename Scalar>
Tensor<Scalar> batchnorm_forward(const Tensor<Scalar>& x, BatchNormParams<Scalar>& p, Mode mode,
                                 BatchNormCache<Scalar>* cache = nullptr) {
  const Index channels = p.gamma.size();
  if (x.shape().back() != channels)
    throw ShapeError("batchnorm channel count " + std::to_string(x.shape().back()) +
                     " does not match parameters " + std::to_string(channels));
  if (mode == Mode::kTrain && x.dim(0) < 2)
    throw ShapeError("batchnorm train mode requires batch size >= 2, got " +
                     std::to_string(x.dim(0)));
  const auto xm = x.matrix();
  const Index m = xm.rows();

  ArrayX<Scalar> mean;
  ArrayX<Scalar> var;
  if (mode == Mode::kTrain) {
    mean = xm.colwise().mean().transpose().array();
    var = (xm.rowwise() - mean.transpose().matrix()).array().square().colwise().sum().transpose() /
          Scalar(m);
    p.running_mean.array() = p.momentum * p.running_mean.array() + (Scalar(1) - p.momentum) * mean;
    p.running_var.array() = p.momentum * p.running_var.array() + (Scalar(1) - p.momentum) * var;
  } else {
    mean = p.running_mean.array();
    var = p.running_var.array();
  }
  const ArrayX<Scalar> inv_std = (var + p.epsilon).rsqrt();

  Tensor<Scalar> normalized(x.shape());
  auto nm = normalized.matrix();
  nm = ((xm.rowwise() - mean.transpose().matrix()).array().rowwise() * inv_std.transpose())
           .matrix();
  Tensor<Scalar> y(x.shape());
  y.matrix() = ((nm.array().rowwise() * p.gamma.array().transpose()).rowwise() +
                p.beta.array().transpose())
                   .matrix();
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->mode = mode;
  }
  return y;
}

template <typename Scalar>
struct BatchNormGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

/// In train mode the batch statistics are treated as functions of x.
template <typename Scalar>
BatchNormGradients<Scalar> batchnorm_backward(const BatchNormParams<Scalar>& p,
                                              const BatchNormCache<Scalar>& cache,
                                              const Tensor<Scalar>& grad_out) {
  detail::check_same_shape(cache.normalized, grad_out, "batchnorm_backward");
  const auto dy = grad_out.matrix().array();
  const auto xhat = cache.normalized.matrix().array();
  BatchNormGradients<Scalar> g{Tensor<Scalar>(grad_out.shape()),
                               Tensor<Scalar>(p.gamma.shape()), Tensor<Scalar>(p.beta.shape())};
  const ArrayX<Scalar> dbeta = dy.colwise().sum().transpose();
  const ArrayX<Scalar> dgamma = (dy * xhat).colwise().sum().transpose();
  g.beta.array() = dbeta;
  g.gamma.array() = dgamma;
  const ArrayX<Scalar> scale_c = p.gamma.array() * cache.inv_std;
  if (cache.mode == Mode::kTrain) {
    const Scalar m = Scalar(dy.rows());
    const ArrayX<Scalar> mean_dy = dbeta / m;
    const ArrayX<Scalar> mean_dy_xhat = dgamma / m;
    g.input.matrix() = (((dy.rowwise() - mean_dy.transpose()) -
                         (xhat.rowwise() * mean_dy_xhat.transpose()))
                            .rowwise() *
                        scale_c.transpose())
                           .matrix();
  } else {
    g.input.matrix() = (dy.rowwise() * scale_c.transpose()).matrix();
  }
  return g;
}

// Dropout -------------------------------------------------------------------

/// Inverted dropout. Returns the output; writes the scaled keep mask (0 or
/// 1/(1-rate)) when `mask` is given. Eval mode and rate 0 are identities and
/// draw nothing from the stream.
template <typename Scalar>
Tensor<Scalar> dropout_forward(const Tensor<Scalar>& x, double rate, Rng* rng, Mode mode,
                               Tensor<Scalar>* mask = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::kEval || rate == 0.0) {
    if (mask) *mask = Tensor<Scalar>();
    return x;
  }
  if (!rng) throw std::invalid_argument("dropout in train mode needs a random stream");
  Tensor<Scalar> keep(x.shape());
  const Scalar survivor = Scalar(1.0 / (1.0 - rate));
  for (Index i = 0; i < keep.size(); ++i) keep[i] = rng->uniform() >= rate ? survivor : Scalar(0);
  Tensor<Scalar> y = mul(x, keep);
  if (mask) *mask = std::move(keep);
  return y;
}

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar>& mask, const Tensor<Scalar>& grad_out) {
  if (mask.empty()) return grad_out;
  return mul(mask, grad_out);
}

// Layer objects -------------------------------------------------------------

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Non-trainable persistent tensor (running statistics).
template <typename Scalar>
struct Buffer {
  std::string name;
  Tensor<Scalar>* value;
};

template <typename Scalar>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual std::string kind() const = 0;

  /// Shape produced for a given input shape (batch axis included).
  virtual Shape output_shape(const Shape& input) const = 0;

  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, Rng* rng) = 0;

  /// Consumes the cache of the latest forward call, accumulates parameter
  /// gradients into Parameter::grad, and returns the input gradient.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) = 0;

  virtual std::vector<Parameter<Scalar>*> parameters() { return {}; }
  virtual std::vector<Buffer<Scalar>> buffers() { return {}; }
  virtual void initialize(Rng&) {}

 private:
  std::string name_;
};

namespace detail {
template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, double limit, Rng& rng) {
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(rng.uniform(-limit, limit));
}
}  // namespace detail

/// 3x3 (configurable) convolution with fused activation.
template <typename Scalar>
class Conv2D final : public Layer<Scalar> {
 public:
  Conv2D(std::string name, Index in_channels, Index filters, Index kernel, Padding padding,
         Activation activation)
      : Layer<Scalar>(std::move(name)),
        kernel_(this->name() + "/kernel", {kernel, kernel, in_channels, filters}),
        bias_(this->name() + "/bias", {filters}),
        padding_(padding),
        activation_(activation) {}

  std::string kind() const override { return "Conv2D"; }

  Shape output_shape(const Shape& in) const override {
    const auto [oh, ow] = conv_output_shape(geometry(in));
    return {in[0], oh, ow, kernel_.value.dim(3)};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode, Rng*) override {
    input_ = x;
    pre_ = conv2d_forward(x, kernel_.value, bias_.value, geometry(x.shape()));
    out_ = apply_activation(pre_, activation_);
    return out_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar> gz = activation_backward(pre_, out_, grad_out, activation_);
    auto g = conv2d_backward(input_, kernel_.value, gz, geometry(input_.shape()));
    kernel_.grad.array() += g.weights.array();
    bias_.grad.array() += g.bias.array();
    return std::move(g.input);
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&kernel_, &bias_}; }

  /// He-uniform; Glorot-uniform when the activation is sigmoid.
  void initialize(Rng& rng) override {
    const auto& s = kernel_.value.shape();
    const double fan_in = double(s[0] * s[1] * s[2]);
    const double fan_out = double(s[0] * s[1] * s[3]);
    const double limit = activation_ == Activation::kSigmoid
                             ? std::sqrt(6.0 / (fan_in + fan_out))
                             : std::sqrt(6.0 / fan_in);
    detail::fill_uniform(kernel_.value, limit, rng);
    bias_.value.fill(Scalar(0));
  }

  ConvGeometry geometry(const Shape& in) const {
    if (in.size() != 4) throw ShapeError(this->name() + ": input must be NHWC rank 4");
    const auto& s = kernel_.value.shape();
    return ConvGeometry::make(in[1], in[2], s[2], s[3], padding_, s[0]);
  }

  Activation activation() const { return activation_; }

 private:
  Parameter<Scalar> kernel_;
  Parameter<Scalar> bias_;
  Padding padding_;
  Activation activation_;
  Tensor<Scalar> input_, pre_, out_;
};

template <typename Scalar>
class Dense final : public Layer<Scalar> {
 public:
  Dense(std::string name, Index inputs, Index units, Activation activation)
      : Layer<Scalar>(std::move(name)),
        kernel_(this->name() + "/kernel", {inputs, units}),
        bias_(this->name() + "/bias", {units}),
        activation_(activation) {}

  std::string kind() const override { return "Dense"; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 2 || in[1] != kernel_.value.dim(0))
      throw ShapeError(this->name() + ": expected input [N, " +
                       std::to_string(kernel_.value.dim(0)) + "], got " + shape_to_string(in));
    return {in[0], kernel_.value.dim(1)};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode, Rng*) override {
    input_ = x;
    pre_ = dense_forward(x, kernel_.value, bias_.value);
    out_ = apply_activation(pre_, activation_);
    return out_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar> gz = activation_backward(pre_, out_, grad_out, activation_);
    auto g = dense_backward(input_, kernel_.value, gz);
    kernel_.grad.array() += g.weights.array();
    bias_.grad.array() += g.bias.array();
    return std::move(g.input);
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&kernel_, &bias_}; }

  void initialize(Rng& rng) override {
    const double fan_in = double(kernel_.value.dim(0));
    const double fan_out = double(kernel_.value.dim(1));
    const double limit = activation_ == Activation::kSigmoid
                             ? std::sqrt(6.0 / (fan_in + fan_out))
                             : std::sqrt(6.0 / fan_in);
    detail::fill_uniform(kernel_.value, limit, rng);
    bias_.value.fill(Scalar(0));
  }

  Activation activation() const { return activation_; }
  Parameter<Scalar>& kernel() { return kernel_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  Parameter<Scalar> kernel_;
  Parameter<Scalar> bias_;
  Activation activation_;
  Tensor<Scalar> input_, pre_, out_;
};

template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  BatchNorm(std::string name, Index channels, bool spatial, double momentum, double epsilon)
      : Layer<Scalar>(std::move(name)),
        gamma_(this->name() + "/gamma", {channels}),
        beta_(this->name() + "/beta", {channels}),
        state_(channels),
        spatial_(spatial) {
    state_.momentum = Scalar(momentum);
    state_.epsilon = Scalar(epsilon);
    gamma_.value.fill(Scalar(1));
  }

  std::string kind() const override { return spatial_ ? "BatchNorm2D" : "BatchNorm1D"; }

  Shape output_shape(const Shape& in) const override {
    if (in.back() != gamma_.value.size())
      throw ShapeError(this->name() + ": channel count mismatch");
    return in;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, Rng*) override {
    sync_affine();
    auto y = batchnorm_forward(x, state_, mode, &cache_);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    sync_affine();
    auto g = batchnorm_backward(state_, cache_, grad_out);
    gamma_.grad.array() += g.gamma.array();
    beta_.grad.array() += g.beta.array();
    return std::move(g.input);
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<Scalar>> buffers() override {
    return {{this->name() + "/moving_mean", &state_.running_mean},
            {this->name() + "/moving_variance", &state_.running_var}};
  }

  void initialize(Rng&) override {
    gamma_.value.fill(Scalar(1));
    beta_.value.fill(Scalar(0));
    state_.running_mean.fill(Scalar(0));
    state_.running_var.fill(Scalar(1));
  }

 private:
  void sync_affine() {
    state_.gamma = gamma_.value;
    state_.beta = beta_.value;
  }

  Parameter<Scalar> gamma_;
  Parameter<Scalar> beta_;
  BatchNormParams<Scalar> state_;
  BatchNormCache<Scalar> cache_;
  bool spatial_;
};

template <typename Scalar>
class MaxPool2D final : public Layer<Scalar> {
 public:
  explicit MaxPool2D(std::string name, PoolGeometry geometry = {})
      : Layer<Scalar>(std::move(name)), geometry_(geometry) {}

  std::string kind() const override { return "MaxPool2D"; }

  Shape output_shape(const Shape& in) const override {
    const auto [oh, ow] = pool_output_shape(in.at(1), in.at(2), geometry_);
    return {in[0], oh, ow, in[3]};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode, Rng*) override {
    auto r = maxpool2d_forward(x, geometry_);
    argmax_ = std::move(r.argmax);
    input_shape_ = x.shape();
    return std::move(r.output);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    return maxpool2d_backward(argmax_, input_shape_, grad_out);
  }

 private:
  PoolGeometry geometry_;
  std::vector<Index> argmax_;
  Shape input_shape_;
};

/// [N, h, w, c] -> [N, h*w*c], row-major.
template <typename Scalar>
Tensor<Scalar> flatten(const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw ShapeError("flatten input must be rank 4");
  return x.reshaped({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
}

template <typename Scalar>
class Flatten final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::string kind() const override { return "Flatten"; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4) throw ShapeError(this->name() + ": input must be rank 4");
    return {in[0], in[1] * in[2] * in[3]};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode, Rng*) override {
    input_shape_ = x.shape();
    return flatten(x);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    return grad_out.reshaped(input_shape_);
  }

 private:
  Shape input_shape_;
};

template <typename Scalar>
class Dropout final : public Layer<Scalar> {
 public:
  Dropout(std::string name, double rate) : Layer<Scalar>(std::move(name)), rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }

  std::string kind() const override { return "Dropout"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, Rng* rng) override {
    return dropout_forward(x, rate_, rng, mode, &mask_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    return dropout_backward(mask_, grad_out);
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  Tensor<Scalar> mask_;
};

template <typename Scalar>
class ActivationLayer final : public Layer<Scalar> {
 public:
  ActivationLayer(std::string name, Activation a) : Layer<Scalar>(std::move(name)), act_(a) {}

  std::string kind() const override { return act_ == Activation::kRelu ? "ReLU" : "Sigmoid"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode, Rng*) override {
    pre_ = x;
    out_ = apply_activation(x, act_);
    return out_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    return activation_backward(pre_, out_, grad_out, act_);
  }

 private:
  Activation act_;
  Tensor<Scalar> pre_, out_;
};

}  // namespace mpox
