#include "kdial/model/checkpoint.hpp"

#include <cstring>

#include "kdial/common/binary_io.hpp"
#include "kdial/common/error.hpp"
#include "kdial/model/transformer.hpp"

namespace kdial::model {

namespace {

constexpr char kMagic[8] = {'K', 'D', 'I', 'A', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename Stored, typename T>
numerics::Tensor<T> read_values(ByteReader& in, numerics::Shape shape) {
  std::vector<Stored> raw(numerics::element_count(shape));
  in.get_into<Stored>(raw);
  return numerics::Tensor<T>(std::move(shape), std::vector<T>(raw.begin(), raw.end()));
}

}  // namespace

template <typename T>
const numerics::Tensor<T>& Checkpoint<T>::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

template <typename T>
bool Checkpoint<T>::contains(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

template <typename T>
void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>& tensors) {
  ByteWriter out;
  out.put_raw(std::string_view(kMagic, sizeof(kMagic)));
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint32_t>(sizeof(T));
  out.put_string(header.dump());
  out.put<std::uint64_t>(tensors.size());
  for (const auto& [name, t] : tensors) {
    out.put_string(name);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) out.put<std::uint64_t>(d);
    out.put_span<T>(t->data());
  }
  write_checked_file(path, std::move(out.bytes()));
}

template <typename T>
Checkpoint<T> read_checkpoint(const std::string& path) {
  const auto bytes = read_checked_file(path);
  ByteReader in(bytes);
  const auto magic = in.get_raw(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError(path + ": not a checkpoint file");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto width = in.get<std::uint32_t>();
  if (width != 4 && width != 8) throw FormatError(path + ": bad element width " + std::to_string(width));
  Checkpoint<T> ckpt;
  try {
    ckpt.header = nlohmann::json::parse(in.get_string());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": bad header: " + e.what());
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = in.get_string();
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw FormatError(path + ": tensor '" + name + "' has rank " + std::to_string(rank));
    numerics::Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint64_t>();
    if (numerics::element_count(shape) * width > in.remaining()) {
      throw FormatError(path + ": tensor '" + name + "' is truncated");
    }
    auto t = width == 4 ? read_values<float, T>(in, std::move(shape)) : read_values<double, T>(in, std::move(shape));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (in.remaining() != 0) throw FormatError(path + ": trailing bytes after last tensor");
  return ckpt;
}

template <typename T>
void save_model(const std::string& path, const ModelConfig& cfg, const numerics::ParameterSet<T>& params,
                const nlohmann::json& metadata,
                const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>& aux) {
  check_parameter_shapes(params, cfg);
  std::vector<std::pair<std::string, const numerics::Tensor<T>*>> tensors;
  for (const auto& name : params.names()) tensors.emplace_back(name, &params.value(name));
  for (const auto& [name, t] : aux) tensors.emplace_back(kAuxTensorPrefix + name, t);
  write_checkpoint<T>(path, {{"kind", "kdial-model"}, {"config", to_json(cfg)}, {"metadata", metadata}}, tensors);
}

template <typename T>
LoadedModel<T> load_model(const std::string& path, const ModelConfig* expected) {
  auto ckpt = read_checkpoint<T>(path);
  if (ckpt.header.value("kind", "") != "kdial-model" || !ckpt.header.contains("config")) {
    throw FormatError(path + ": not a model checkpoint");
  }
  LoadedModel<T> out;
  out.config = model_config_from_json(ckpt.header.at("config"));
  if (expected != nullptr && !(*expected == out.config)) {
    throw ShapeError(path + ": checkpoint config does not match (expected vs stored: " +
                     describe_difference(*expected, out.config) + ")");
  }
  out.metadata = ckpt.header.value("metadata", nlohmann::json::object());
  const std::string prefix = kAuxTensorPrefix;
  for (auto& [name, t] : ckpt.tensors) {
    if (name.rfind(prefix, 0) == 0) {
      out.aux.emplace_back(name.substr(prefix.size()), std::move(t));
    } else {
      out.params.add(name, std::move(t));
    }
  }
  check_parameter_shapes(out.params, out.config);
  return out;
}

#define KDIAL_INSTANTIATE(T)                                                                                       \
  template struct Checkpoint<T>;                                                                                  \
  template void write_checkpoint<T>(const std::string&, const nlohmann::json&,                                    \
                                    const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>&);      \
  template Checkpoint<T> read_checkpoint<T>(const std::string&);                                                  \
  template void save_model<T>(const std::string&, const ModelConfig&, const numerics::ParameterSet<T>&,          \
                              const nlohmann::json&,                                                              \
                              const std::vector<std::pair<std::string, const numerics::Tensor<T>*>>&);            \
  template LoadedModel<T> load_model<T>(const std::string&, const ModelConfig*);

KDIAL_INSTANTIATE(float)
KDIAL_INSTANTIATE(double)

}  // namespace kdial::model
