#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kdial/numerics/tensor.hpp"

namespace kdial::numerics {

/// Named trainable tensors, each with a gradient slot of identical shape.
/// Iteration order is insertion order, which makes every consumer
/// (optimizers, checkpoints, gradient checks) deterministic.
template <typename T>
class ParameterSet {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }
  const Tensor<T>& grad(const std::string& name) const { return entry(name).grad; }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t element_count() const;

  void zero_grad();

 private:
  struct Entry {
    Tensor<T> value;
    Tensor<T> grad;
  };
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::vector<std::string> order_;
  std::unordered_map<std::string, Entry> entries_;
};

enum class OpKind {
  kInput,
  kConstant,
  kParameter,
  kMatMul,
  kAdd,
  kMultiply,
  kScale,
  kSum,
  kEmbedding,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kDropout,
  kReshape,
  kTranspose,
  kConcatCols,
  kSliceCols,
  kRope,
  kCrossEntropy,
};

const char* op_name(OpKind kind);

using NodeId = std::size_t;

/// Define-then-run computation graph with reverse-mode differentiation.
///
/// Nodes are appended in topological order (an op can only reference
/// existing nodes), so the node list doubles as the evaluation schedule.
/// `evaluate` binds named inputs and runs every node forward; `backward`
/// seeds a scalar node and accumulates gradients into the ParameterSet.
/// Shapes are checked when the graph is evaluated; errors name the node.
template <typename T>
class Graph {
 public:
  explicit Graph(ParameterSet<T>* params = nullptr) : params_(params) {}

  NodeId input(const std::string& name);
  NodeId constant(Tensor<T> value, const std::string& name = {});
  // One node per parameter name; repeated calls return the same node.
  NodeId parameter(const std::string& name);

  NodeId matmul(NodeId a, NodeId b);
  // Same-shape addition, or `b` of shape [cols] broadcast over the rows of `a`.
  NodeId add(NodeId a, NodeId b);
  NodeId multiply(NodeId a, NodeId b);
  NodeId scale(NodeId a, T factor);
  NodeId sum(NodeId a);
  NodeId embedding(NodeId table, std::vector<std::int32_t> ids, const std::string& name = {});
  // Row softmax over the last axis. `additive_mask` (same shape, constant) holds
  // 0 for visible and -inf for hidden entries; hidden entries get exactly 0.
  NodeId softmax(NodeId logits, std::optional<NodeId> additive_mask = std::nullopt);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, T eps);
  NodeId gelu(NodeId x);
  NodeId dropout(NodeId x, T rate, std::uint64_t seed);
  NodeId reshape(NodeId x, Shape shape);
  NodeId transpose(NodeId x);
  NodeId concat_cols(std::vector<NodeId> parts);
  NodeId slice_cols(NodeId x, std::size_t begin, std::size_t width);
  NodeId rope(NodeId x, std::vector<double> positions, double base);
  // Mean over rows with mask[i] != 0 of -log softmax(logits[i])[targets[i]].
  NodeId cross_entropy(NodeId logits, std::vector<std::int32_t> targets, std::vector<std::uint8_t> mask);

  void mark_output(const std::string& name, NodeId node) { outputs_[name] = node; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }
  // Reject non-finite intermediates, reporting the node id.
  void set_debug_checks(bool enabled) { debug_checks_ = enabled; }

  std::map<std::string, Tensor<T>> evaluate(const std::map<std::string, Tensor<T>>& inputs);
  // Re-runs the forward pass with the most recently bound inputs.
  void reevaluate();

  // Adds seed·d(loss)/d(param) into the ParameterSet gradient slots.
  void accumulate_gradients(NodeId loss, T seed = T{1});
  // Zeroes the ParameterSet gradients, back-propagates from `loss`, and
  // returns a gradient for every parameter in the set (zeros when unused).
  std::map<std::string, Tensor<T>> backward(NodeId loss);

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor<T>& grad(NodeId id) const { return nodes_.at(id).grad; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs_of(NodeId id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }
  ParameterSet<T>* parameters() const { return params_; }
  // Names of the parameters referenced by this graph, in node order.
  std::vector<std::string> referenced_parameters() const;

 private:
  struct Attrs {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;
    std::vector<double> positions;
    Shape shape;
    double scalar = 0.0;
    std::size_t begin = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;
  };
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    std::string name;
    Attrs attrs;
    bool requires_grad = false;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> aux;
    Tensor<T> aux2;
  };

  NodeId push(OpKind kind, std::vector<NodeId> inputs, Attrs attrs = {}, std::string name = {});
  void check_id(NodeId id) const;
  [[noreturn]] void fail(NodeId id, const std::string& message) const;
  void forward(NodeId id);
  void backward_node(NodeId id);
  Tensor<T>& grad_slot(NodeId id);

  ParameterSet<T>* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeId> parameter_nodes_;
  std::map<std::string, NodeId> outputs_;
  std::map<std::string, Tensor<T>> bound_inputs_;
  bool training_ = false;
  bool debug_checks_ = false;
  bool evaluated_ = false;
};

template <typename T>
std::map<std::string, Tensor<T>> evaluate(Graph<T>& graph, const std::map<std::string, Tensor<T>>& inputs) {
  return graph.evaluate(inputs);
}

template <typename T>
std::map<std::string, Tensor<T>> backward(Graph<T>& graph, NodeId loss) {
  return graph.backward(loss);
}

}  // namespace kdial::numerics
