#include "kdial/model/config.hpp"

#include <sstream>

#include "kdial/common/error.hpp"

namespace kdial::model {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("model config: " + msg); };
  if (layers == 0) fail("layers must be positive");
  if (embed_dim == 0 || heads == 0) fail("embed_dim and heads must be positive");
  if (embed_dim % heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (head_dim() % 2 != 0) fail("head dimension " + std::to_string(head_dim()) + " must be even for rotary encoding");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (vocab_size == 0 || max_len == 0) fail("vocab_size and max_len must be positive");
  if (type_count < 4) fail("type_count must be at least 4");
  if (role_count == 0) fail("role_count must be positive");
  if (!(rope_base > 1.0)) fail("rope_base must exceed 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(init_std > 0.0)) fail("init_std must be positive");
  if (!(layer_norm_eps > 0.0)) fail("layer_norm_eps must be positive");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.layers = 48;
  c.embed_dim = 6144;
  c.ffn_dim = 24576;
  c.heads = 64;
  c.vocab_size = 32000;
  c.max_len = 1024;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},       {"embed_dim", c.embed_dim},   {"ffn_dim", c.ffn_dim},
          {"heads", c.heads},         {"vocab_size", c.vocab_size}, {"max_len", c.max_len},
          {"type_count", c.type_count}, {"role_count", c.role_count}, {"rope_base", c.rope_base},
          {"layer_norm_eps", c.layer_norm_eps}, {"dropout", c.dropout}, {"init_std", c.init_std}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (!j.is_object()) throw ValidationError("model config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* known[] = {"layers",     "embed_dim", "ffn_dim",        "heads",   "vocab_size", "max_len",
                                  "type_count", "role_count", "rope_base", "layer_norm_eps", "dropout", "init_std"};
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ValidationError("model config: unknown field '" + it.key() + "'");
  }
  get("layers", c.layers);
  get("embed_dim", c.embed_dim);
  get("ffn_dim", c.ffn_dim);
  get("heads", c.heads);
  get("vocab_size", c.vocab_size);
  get("max_len", c.max_len);
  get("type_count", c.type_count);
  get("role_count", c.role_count);
  get("rope_base", c.rope_base);
  get("layer_norm_eps", c.layer_norm_eps);
  get("dropout", c.dropout);
  get("init_std", c.init_std);
  c.validate();
  return c;
}

std::string describe_difference(const ModelConfig& expected, const ModelConfig& actual) {
  const auto a = to_json(expected);
  const auto b = to_json(actual);
  std::ostringstream out;
  for (auto it = a.begin(); it != a.end(); ++it) {
    if (b.at(it.key()) != it.value()) {
      if (out.tellp() > 0) out << ", ";
      out << it.key() << " " << it.value().dump() << " vs " << b.at(it.key()).dump();
    }
  }
  return out.str();
}

}  // namespace kdial::model
