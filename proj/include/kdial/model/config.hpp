#pragma once

#include <cstddef>

#include <nlohmann/json.hpp>

namespace kdial::model {

/// Shape hyperparameters of the unified transformer.
struct ModelConfig {
  std::size_t layers = 4;
  std::size_t embed_dim = 128;
  std::size_t ffn_dim = 512;
  std::size_t heads = 4;
  std::size_t vocab_size = 2048;
  std::size_t max_len = 256;
  std::size_t type_count = 4;
  std::size_t role_count = 8;
  double rope_base = 10000.0;
  double layer_norm_eps = 1e-5;
  double dropout = 0.0;
  double init_std = 0.02;

  std::size_t head_dim() const { return embed_dim / heads; }

  // Throws ValidationError on inconsistent shapes.
  void validate() const;

  // 4 layers, width 128, ffn 512, 4 heads, 2048 tokens, 256 positions.
  static ModelConfig desk();
  // The 48-block, 6144-wide, 32K-vocabulary, 1024-token shape. Documentation
  // only; the head count is our choice (it is not published).
  static ModelConfig full_scale();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Human-readable list of differing fields, empty when equal.
std::string describe_difference(const ModelConfig& expected, const ModelConfig& actual);

}  // namespace kdial::model
