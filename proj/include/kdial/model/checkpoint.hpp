#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/model/config.hpp"
#include "kdial/numerics/graph.hpp"

namespace kdial::model {

/// Named tensors plus a JSON header in a checksummed binary container.
/// Layout: magic, format version, element width, header JSON, tensor count,
/// then per tensor its name, rank, dims and raw little-endian data; a CRC-32
/// of everything before it closes the file. Values round-trip bit-exactly.
template <typename T>
struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, numerics::Tensor<T>>> tensors;

  const numerics::Tensor<T>& tensor(const std::string& name) const;
  bool contains(const std::string& name) const;
};

template <typename T>
void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>& tensors);

// Stored values are converted to T when the file's element width differs.
template <typename T>
Checkpoint<T> read_checkpoint(const std::string& path);

// Tensors whose names start with this prefix are not model weights.
inline constexpr const char* kAuxTensorPrefix = "aux.";

template <typename T>
void save_model(const std::string& path, const ModelConfig& cfg, const numerics::ParameterSet<T>& params,
                const nlohmann::json& metadata = nlohmann::json::object(),
                const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>& aux = {});

template <typename T>
struct LoadedModel {
  ModelConfig config;
  numerics::ParameterSet<T> params;
  nlohmann::json metadata;
  std::vector<std::pair<std::string, numerics::Tensor<T>>> aux;
};

// With `expected`, a checkpoint built for a different shape is rejected with
// a message naming the differing fields.
template <typename T>
LoadedModel<T> load_model(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace kdial::model
