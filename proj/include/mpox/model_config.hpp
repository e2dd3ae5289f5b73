#pragma once

#include "mpox/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace mpox {

/// Declarative description of the conv/dense ladder.
struct ModelConfig {
  std::vector<Index> conv_filters{16, 32, 64, 128, 256, 512};
  Index kernel = 3;
  std::vector<bool> pool_after_block{true, true, true, true, true, true};
  std::vector<Index> dense_widths{256, 128, 64};
  double dropout_rate = 0.5;
  Index output_units = 2;
  Index input_h = 224;
  Index input_w = 224;
  Index input_channels = 3;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  /// Pools after all six blocks; 224 input flattens from 3x3x512.
  static ModelConfig six_pool();
  /// No pool after the last block; 224 input flattens from 7x7x512.
  static ModelConfig paper_figure();

  /// Throws std::invalid_argument when lists disagree or the spatial chain
  /// collapses to zero.
  void validate() const;

  /// Per-sample (h, w, c) after each conv block, in order.
  std::vector<Shape> block_output_shapes() const;
  /// Per-sample shape entering the Flatten layer.
  Shape pre_flatten_shape() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Names accepted by --preset.
ModelConfig model_preset(const std::string& name);
/// "six-pool", "paper-figure", or "custom".
std::string preset_name(const ModelConfig& config);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace mpox
