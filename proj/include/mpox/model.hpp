#pragma once

#include "mpox/layers.hpp"
#include "mpox/model_config.hpp"

#include <map>

namespace mpox {

/// Ordered layer stack built from a ModelConfig.
template <typename Scalar>
class Model {
 public:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const std::vector<std::unique_ptr<Layer<Scalar>>>& layers() const { return layers_; }

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, Rng* rng = nullptr) {
    Tensor<Scalar> h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode, rng);
    return h;
  }

  /// Backpropagates through every layer; parameter gradients accumulate.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    Tensor<Scalar> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.fill(Scalar(0));
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& layer : layers_)
      for (auto* p : layer->parameters()) out.push_back(p);
    return out;
  }

  std::vector<Buffer<Scalar>> buffers() {
    std::vector<Buffer<Scalar>> out;
    for (auto& layer : layers_)
      for (auto& b : layer->buffers()) out.push_back(b);
    return out;
  }

  /// Every persistent tensor by name: parameters, then running statistics.
  std::vector<std::pair<std::string, Tensor<Scalar>*>> named_tensors() {
    std::vector<std::pair<std::string, Tensor<Scalar>*>> out;
    for (auto& layer : layers_) {
      for (auto* p : layer->parameters()) out.emplace_back(p->name, &p->value);
      for (auto& b : layer->buffers()) out.emplace_back(b.name, b.value);
    }
    return out;
  }

  void initialize(Rng& rng) {
    for (auto& layer : layers_) layer->initialize(rng);
  }

  Shape input_shape(Index batch = 1) const {
    return {batch, config_.input_h, config_.input_w, config_.input_channels};
  }

 private:
  ModelConfig config_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

/// Conv blocks [Conv2D(same, ReLU) -> BatchNorm2D -> optional MaxPool2D],
/// then Flatten, then [Dense(ReLU) -> BatchNorm1D -> Dropout] per dense
/// width, then Dense(output_units, sigmoid). Parameters are initialized from
/// `init` when given, otherwise left at zero/identity values.
template <typename Scalar = float>
Model<Scalar> build_mpoxsldnet(const ModelConfig& config, Rng* init = nullptr) {
  config.validate();
  Model<Scalar> model(config);
  Index channels = config.input_channels;
  int pool_count = 0;
  for (std::size_t i = 0; i < config.conv_filters.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    const Index filters = config.conv_filters[i];
    model.template add<Conv2D<Scalar>>("conv2d_" + idx, channels, filters, config.kernel,
                                       Padding::kSame, Activation::kRelu);
    model.template add<BatchNorm<Scalar>>("batch_norm_" + idx, filters, true,
                                          config.bn_momentum, config.bn_epsilon);
    if (config.pool_after_block[i])
      model.template add<MaxPool2D<Scalar>>("max_pool_" + std::to_string(++pool_count));
    channels = filters;
  }
  model.template add<Flatten<Scalar>>("flatten");
  const Shape flat = config.pre_flatten_shape();
  Index width = flat[0] * flat[1] * flat[2];
  for (std::size_t i = 0; i < config.dense_widths.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    const Index units = config.dense_widths[i];
    model.template add<Dense<Scalar>>("dense_" + idx, width, units, Activation::kRelu);
    model.template add<BatchNorm<Scalar>>("batch_norm_dense_" + idx, units, false,
                                          config.bn_momentum, config.bn_epsilon);
    model.template add<Dropout<Scalar>>("dropout_" + idx, config.dropout_rate);
    width = units;
  }
  model.template add<Dense<Scalar>>("dense_out", width, config.output_units,
                                    Activation::kSigmoid);
  if (init) model.initialize(*init);
  return model;
}

struct LayerSummary {
  std::string name;
  std::string kind;
  Shape output_shape;  // batch axis excluded
  Index trainable = 0;
  Index non_trainable = 0;
};

struct ParameterTable {
  std::vector<LayerSummary> rows;
  Index trainable = 0;
  Index non_trainable = 0;
  Index total() const { return trainable + non_trainable; }
};

/// Per-layer counts from the layer formulas: conv kh*kw*in*out + out, dense
/// in*out + out, batchnorm 2*channels trainable plus 2*channels running stats.
template <typename Scalar>
ParameterTable count_parameters(Model<Scalar>& model) {
  ParameterTable table;
  Shape shape = model.input_shape(1);
  for (auto& layer : model.layers()) {
    const Shape in = shape;
    shape = layer->output_shape(in);
    LayerSummary row{layer->name(), layer->kind(), Shape(shape.begin() + 1, shape.end()), 0, 0};
    const std::string kind = layer->kind();
    if (kind == "Conv2D") {
      const Index out = shape.back();
      const Index k = model.config().kernel;
      row.trainable = k * k * in.back() * out + out;
    } else if (kind == "Dense") {
      row.trainable = in.back() * shape.back() + shape.back();
    } else if (kind == "BatchNorm2D" || kind == "BatchNorm1D") {
      row.trainable = 2 * shape.back();
      row.non_trainable = 2 * shape.back();
    }
    table.trainable += row.trainable;
    table.non_trainable += row.non_trainable;
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string render_shape(const Shape& per_sample) {
  std::string s;
  for (std::size_t i = 0; i < per_sample.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(per_sample[i]);
  }
  return s;
}

}  // namespace mpox
