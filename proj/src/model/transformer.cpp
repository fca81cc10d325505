#include "kdial/model/transformer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "kdial/common/error.hpp"
#include "kdial/model/attention_mask.hpp"
#include "kdial/numerics/kernels.hpp"

namespace kdial::model {

namespace {

std::string layer_name(std::size_t l, const char* suffix) { return "layers." + std::to_string(l) + "." + suffix; }

struct ParamSpec {
  std::string name;
  numerics::Shape shape;
  enum { kNormal, kZero, kOne } init;
};

std::vector<ParamSpec> parameter_specs(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  std::vector<ParamSpec> specs = {
      {"tok_emb", {c.vocab_size, d}, ParamSpec::kNormal},
      {"type_emb", {c.type_count, d}, ParamSpec::kNormal},
      {"role_emb", {c.role_count, d}, ParamSpec::kNormal},
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    specs.push_back({layer_name(l, "ln1.gain"), {d}, ParamSpec::kOne});
    specs.push_back({layer_name(l, "ln1.bias"), {d}, ParamSpec::kZero});
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      specs.push_back({layer_name(l, w), {d, d}, ParamSpec::kNormal});
      specs.push_back({layer_name(l, w) + "_bias", {d}, ParamSpec::kZero});
    }
    specs.push_back({layer_name(l, "ln2.gain"), {d}, ParamSpec::kOne});
    specs.push_back({layer_name(l, "ln2.bias"), {d}, ParamSpec::kZero});
    specs.push_back({layer_name(l, "ffn.w1"), {d, c.ffn_dim}, ParamSpec::kNormal});
    specs.push_back({layer_name(l, "ffn.b1"), {c.ffn_dim}, ParamSpec::kZero});
    specs.push_back({layer_name(l, "ffn.w2"), {c.ffn_dim, d}, ParamSpec::kNormal});
    specs.push_back({layer_name(l, "ffn.b2"), {d}, ParamSpec::kZero});
  }
  specs.push_back({"ln_f.gain", {d}, ParamSpec::kOne});
  specs.push_back({"ln_f.bias", {d}, ParamSpec::kZero});
  specs.push_back({"out.w", {d, c.vocab_size}, ParamSpec::kNormal});
  specs.push_back({"out.b", {c.vocab_size}, ParamSpec::kZero});
  return specs;
}

std::vector<double> positions_of(std::span<const std::int32_t> positions) {
  return std::vector<double>(positions.begin(), positions.end());
}

}  // namespace

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  ParameterSet<T> params;
  for (const auto& spec : parameter_specs(cfg)) {
    Tensor<T> t(spec.shape);
    switch (spec.init) {
      case ParamSpec::kNormal:
        for (auto& v : t.storage()) v = static_cast<T>(normal(rng));
        break;
      case ParamSpec::kOne:
        t.fill(T{1});
        break;
      case ParamSpec::kZero:
        break;
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

template <typename T>
void check_parameter_shapes(const ParameterSet<T>& params, const ModelConfig& cfg) {
  const auto specs = parameter_specs(cfg);
  for (const auto& spec : specs) {
    if (!params.contains(spec.name)) throw ShapeError("missing parameter '" + spec.name + "'");
    const auto& shape = params.value(spec.name).shape();
    if (shape != spec.shape) {
      throw ShapeError("parameter '" + spec.name + "' has shape " + numerics::shape_string(shape) + ", config implies " +
                       numerics::shape_string(spec.shape));
    }
  }
  if (params.size() != specs.size()) {
    for (const auto& name : params.names()) {
      bool known = false;
      for (const auto& spec : specs) known = known || spec.name == name;
      if (!known) throw ShapeError("unexpected parameter '" + name + "'");
    }
  }
}

template <typename T>
ForwardPass<T> build_forward(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq,
                             const ForwardOptions<T>& options) {
  validate_sequence(seq, cfg);
  ForwardPass<T> pass(&params);
  auto& g = pass.graph;
  g.set_training(options.training);
  const std::size_t n = seq.size();
  const std::size_t hd = cfg.head_dim();
  const T eps = static_cast<T>(cfg.layer_norm_eps);
  const T rate = static_cast<T>(cfg.dropout);
  const bool use_dropout = options.training && cfg.dropout > 0.0;
  std::uint64_t dropout_site = 0;
  auto drop = [&](NodeId x) {
    return use_dropout ? g.dropout(x, rate, options.dropout_seed * 1000003ULL + (++dropout_site)) : x;
  };

  NodeId x = g.embedding(g.parameter("tok_emb"), seq.tokens, "tokens");
  x = g.add(x, g.embedding(g.parameter("type_emb"), seq.types, "types"));
  x = g.add(x, g.embedding(g.parameter("role_emb"), seq.roles, "roles"));
  if (options.input_offset != nullptr) x = g.add(x, g.constant(*options.input_offset, "input_offset"));
  pass.input_embedding = x;
  x = drop(x);

  const NodeId mask = g.constant(build_prefix_mask(seq.prefix_len, n).additive<T>(), "prefix_mask");
  const auto pos = positions_of(seq.positions);
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
  auto linear = [&](NodeId in, const std::string& w, const std::string& b) {
    return g.add(g.matmul(in, g.parameter(w)), g.parameter(b));
  };

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    NodeId h = g.layer_norm(x, g.parameter(layer_name(l, "ln1.gain")), g.parameter(layer_name(l, "ln1.bias")), eps);
    const NodeId q = linear(h, layer_name(l, "attn.wq"), layer_name(l, "attn.wq_bias"));
    const NodeId k = linear(h, layer_name(l, "attn.wk"), layer_name(l, "attn.wk_bias"));
    const NodeId v = linear(h, layer_name(l, "attn.wv"), layer_name(l, "attn.wv_bias"));
    std::vector<NodeId> heads;
    for (std::size_t head = 0; head < cfg.heads; ++head) {
      const NodeId qh = g.rope(g.slice_cols(q, head * hd, hd), pos, cfg.rope_base);
      const NodeId kh = g.rope(g.slice_cols(k, head * hd, hd), pos, cfg.rope_base);
      const NodeId vh = g.slice_cols(v, head * hd, hd);
      const NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
      heads.push_back(g.matmul(g.softmax(scores, mask), vh));
    }
    const NodeId attn = linear(g.concat_cols(heads), layer_name(l, "attn.wo"), layer_name(l, "attn.wo_bias"));
    x = g.add(x, drop(attn));
    h = g.layer_norm(x, g.parameter(layer_name(l, "ln2.gain")), g.parameter(layer_name(l, "ln2.bias")), eps);
    const NodeId f = linear(g.gelu(linear(h, layer_name(l, "ffn.w1"), layer_name(l, "ffn.b1"))),
                            layer_name(l, "ffn.w2"), layer_name(l, "ffn.b2"));
    x = g.add(x, drop(f));
  }
  x = g.layer_norm(x, g.parameter("ln_f.gain"), g.parameter("ln_f.bias"), eps);
  pass.logits = linear(x, "out.w", "out.b");
  g.mark_output("logits", pass.logits);
  return pass;
}

template <typename T>
Tensor<T> embed(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq) {
  validate_sequence(seq, cfg);
  auto pass = build_forward(params, cfg, seq);
  pass.graph.evaluate({});
  return pass.graph.value(pass.input_embedding);
}

template <typename T>
Tensor<T> apply_rope(const Tensor<T>& vectors, std::span<const std::int32_t> positions, double base) {
  if (vectors.rank() != 2 || vectors.rows() != positions.size()) {
    throw ShapeError("apply_rope: " + numerics::shape_string(vectors.shape()) + " with " +
                     std::to_string(positions.size()) + " positions");
  }
  if (vectors.cols() % 2 != 0) throw ShapeError("apply_rope: odd width " + std::to_string(vectors.cols()));
  Tensor<T> out = vectors;
  const auto pos = positions_of(positions);
  numerics::rope_rotate<T>(out.data(), out.cols(), pos, base);
  return out;
}

template <typename T>
Tensor<T> forward(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq,
                  const ForwardOptions<T>& options) {
  auto pass = build_forward(params, cfg, seq, options);
  return pass.graph.evaluate({}).at("logits");
}

template <typename T>
double nll_loss(const Tensor<T>& logits, std::span<const std::int32_t> targets, std::span<const std::uint8_t> mask) {
  if (logits.rank() != 2 || logits.rows() != targets.size() || mask.size() != targets.size()) {
    throw ShapeError("nll_loss: logits " + numerics::shape_string(logits.shape()) + ", " +
                     std::to_string(targets.size()) + " targets, " + std::to_string(mask.size()) + " mask entries");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    const auto row = logits.row(i);
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= row.size()) {
      throw RangeError("nll_loss: target " + std::to_string(targets[i]) + " at row " + std::to_string(i));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : row) mx = std::max(mx, static_cast<double>(v));
    double z = 0.0;
    for (T v : row) z += std::exp(static_cast<double>(v) - mx);
    total += mx + std::log(z) - static_cast<double>(row[targets[i]]);
    ++count;
  }
  if (count == 0) throw ValidationError("nll_loss: no trainable targets");
  return total / static_cast<double>(count);
}

template <typename T>
AccuracyCount masked_accuracy(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq) {
  const auto logits = forward(params, cfg, seq);
  const auto shifted = shift_targets(seq);
  AccuracyCount acc;
  for (std::size_t i = 0; i < shifted.targets.size(); ++i) {
    if (!shifted.mask[i]) continue;
    const auto row = logits.row(i);
    const auto best = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    acc.correct += best == shifted.targets[i];
    ++acc.total;
  }
  return acc;
}

#define KDIAL_INSTANTIATE(T)                                                                                     \
  template ParameterSet<T> init_parameters<T>(const ModelConfig&, std::uint64_t);                               \
  template void check_parameter_shapes<T>(const ParameterSet<T>&, const ModelConfig&);                          \
  template ForwardPass<T> build_forward<T>(ParameterSet<T>&, const ModelConfig&, const Sequence&,                \
                                           const ForwardOptions<T>&);                                            \
  template Tensor<T> embed<T>(ParameterSet<T>&, const ModelConfig&, const Sequence&);                          \
  template Tensor<T> apply_rope<T>(const Tensor<T>&, std::span<const std::int32_t>, double);                    \
  template Tensor<T> forward<T>(ParameterSet<T>&, const ModelConfig&, const Sequence&, const ForwardOptions<T>&); \
  template double nll_loss<T>(const Tensor<T>&, std::span<const std::int32_t>, std::span<const std::uint8_t>);  \
  template AccuracyCount masked_accuracy<T>(ParameterSet<T>&, const ModelConfig&, const Sequence&);

KDIAL_INSTANTIATE(float)
KDIAL_INSTANTIATE(double)

}  // namespace kdial::model
