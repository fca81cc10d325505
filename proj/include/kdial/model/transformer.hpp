#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/numerics/graph.hpp"

namespace kdial::model {

using numerics::NodeId;
using numerics::ParameterSet;
using numerics::Tensor;

/// Allocates every weight named by the config: normal(0, init_std) for
/// matrices and embedding tables, zeros for biases, ones for norm gains.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed);

// Checks that `params` holds exactly the tensors `cfg` implies.
template <typename T>
void check_parameter_shapes(const ParameterSet<T>& params, const ModelConfig& cfg);

template <typename T>
struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  // Added to the summed input embedding; lets probes perturb one position.
  const Tensor<T>* input_offset = nullptr;
};

/// A forward pass recorded on a graph, ready for evaluate/backward.
template <typename T>
struct ForwardPass {
  numerics::Graph<T> graph;
  NodeId input_embedding = 0;
  NodeId logits = 0;
  explicit ForwardPass(ParameterSet<T>* params) : graph(params) {}
};

template <typename T>
ForwardPass<T> build_forward(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq,
                             const ForwardOptions<T>& options = {});

// token_emb[tokens[i]] + type_emb[types[i]] + role_emb[roles[i]], [len x embed_dim].
template <typename T>
Tensor<T> embed(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq);

// Rotary position encoding of each row of a [len x head_dim] tensor.
template <typename T>
Tensor<T> apply_rope(const Tensor<T>& vectors, std::span<const std::int32_t> positions, double base);

// Logits [len x vocab_size].
template <typename T>
Tensor<T> forward(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq,
                  const ForwardOptions<T>& options = {});

// Mean over masked rows of -log softmax(logits[i])[targets[i]].
template <typename T>
double nll_loss(const Tensor<T>& logits, std::span<const std::int32_t> targets, std::span<const std::uint8_t> mask);

struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

// Argmax next-token accuracy over loss-masked targets.
template <typename T>
AccuracyCount masked_accuracy(ParameterSet<T>& params, const ModelConfig& cfg, const Sequence& seq);

}  // namespace kdial::model
