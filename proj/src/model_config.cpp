#include "mpox/model_config.hpp"

#include "mpox/kernels.hpp"

#include <nlohmann/json.hpp>

namespace mpox {

ModelConfig ModelConfig::six_pool() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_figure() {
  ModelConfig c;
  c.pool_after_block = {true, true, true, true, true, false};
  return c;
}

void ModelConfig::validate() const {
  if (conv_filters.empty()) throw std::invalid_argument("model needs at least one conv block");
  if (conv_filters.size() != pool_after_block.size())
    throw std::invalid_argument("conv_filters has " + std::to_string(conv_filters.size()) +
                                " entries but pool_after_block has " +
                                std::to_string(pool_after_block.size()));
  for (Index f : conv_filters)
    if (f <= 0) throw std::invalid_argument("conv filter counts must be positive");
  for (Index d : dense_widths)
    if (d <= 0) throw std::invalid_argument("dense widths must be positive");
  if (kernel <= 0 || kernel % 2 == 0)
    throw std::invalid_argument("kernel size must be a positive odd number");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("dropout_rate must be in [0, 1)");
  if (output_units <= 0) throw std::invalid_argument("output_units must be positive");
  if (input_h <= 0 || input_w <= 0 || input_channels <= 0)
    throw std::invalid_argument("input dimensions must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
    throw std::invalid_argument("bn_momentum must be in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw std::invalid_argument("bn_epsilon must be positive");
  try {
    (void)block_output_shapes();
  } catch (const ShapeError& e) {
    throw std::invalid_argument(std::string("shape chain collapses: ") + e.what());
  }
}

std::vector<Shape> ModelConfig::block_output_shapes() const {
  std::vector<Shape> out;
  Index h = input_h, w = input_w, c = input_channels;
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    const auto [ch, cw] =
        conv_output_shape(ConvGeometry::make(h, w, c, conv_filters[i], Padding::kSame, kernel));
    h = ch;
    w = cw;
    c = conv_filters[i];
    if (i < pool_after_block.size() && pool_after_block[i]) {
      const auto [ph, pw] = pool_output_shape(h, w, PoolGeometry{});
      h = ph;
      w = pw;
    }
    out.push_back({h, w, c});
  }
  return out;
}

Shape ModelConfig::pre_flatten_shape() const { return block_output_shapes().back(); }

ModelConfig model_preset(const std::string& name) {
  if (name == "six-pool") return ModelConfig::six_pool();
  if (name == "paper-figure") return ModelConfig::paper_figure();
  throw std::invalid_argument("unknown preset '" + name + "' (expected six-pool|paper-figure)");
}

std::string preset_name(const ModelConfig& config) {
  ModelConfig probe = config;
  probe.pool_after_block = ModelConfig::six_pool().pool_after_block;
  if (probe == ModelConfig::six_pool()) {
    if (config.pool_after_block == ModelConfig::six_pool().pool_after_block) return "six-pool";
    if (config.pool_after_block == ModelConfig::paper_figure().pool_after_block)
      return "paper-figure";
  }
  return "custom";
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"conv_filters", c.conv_filters},
                     {"kernel", c.kernel},
                     {"pool_after_block", c.pool_after_block},
                     {"dense_widths", c.dense_widths},
                     {"dropout_rate", c.dropout_rate},
                     {"output_units", c.output_units},
                     {"input_h", c.input_h},
                     {"input_w", c.input_w},
                     {"input_channels", c.input_channels},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_epsilon", c.bn_epsilon}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.conv_filters = j.value("conv_filters", d.conv_filters);
  c.kernel = j.value("kernel", d.kernel);
  if (j.contains("pool_after_block")) {
    c.pool_after_block = j.at("pool_after_block").get<std::vector<bool>>();
  } else {
    c.pool_after_block.assign(c.conv_filters.size(), true);
  }
  c.dense_widths = j.value("dense_widths", d.dense_widths);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
  c.output_units = j.value("output_units", d.output_units);
  c.input_h = j.value("input_h", d.input_h);
  c.input_w = j.value("input_w", d.input_w);
  c.input_channels = j.value("input_channels", d.input_channels);
  c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
  c.bn_epsilon = j.value("bn_epsilon", d.bn_epsilon);
}

}  // namespace mpox
