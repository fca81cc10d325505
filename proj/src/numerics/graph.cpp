#include "kdial/numerics/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kdial/numerics/kernels.hpp"

namespace kdial::numerics {

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
Tensor<T>& ParameterSet<T>::add(const std::string& name, Tensor<T> value) {
  if (entries_.count(name)) throw ValidationError("duplicate parameter '" + name + "'");
  Tensor<T> grad(value.shape());
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(value), std::move(grad)});
  order_.push_back(name);
  return it->second.value;
}

template <typename T>
std::size_t ParameterSet<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += entries_.at(name).value.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [name, e] : entries_) e.grad.fill(T{0});
}

template <typename T>
typename ParameterSet<T>::Entry& ParameterSet<T>::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const typename ParameterSet<T>::Entry& ParameterSet<T>::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Graph construction

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kGelu: return "gelu";
    case OpKind::kDropout: return "dropout";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kConcatCols: return "concat";
    case OpKind::kSliceCols: return "slice";
    case OpKind::kRope: return "rope";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

template <typename T>
void Graph<T>::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw ValidationError("graph node " + std::to_string(id) + " does not exist");
}

template <typename T>
void Graph<T>::fail(NodeId id, const std::string& message) const {
  const auto& n = nodes_[id];
  std::string where = "node " + std::to_string(id);
  if (!n.name.empty()) where += " '" + n.name + "'";
  where += " (" + std::string(op_name(n.kind)) + ")";
  throw ShapeError(where + ": " + message);
}

template <typename T>
NodeId Graph<T>::push(OpKind kind, std::vector<NodeId> inputs, Attrs attrs, std::string name) {
  bool requires_grad = kind == OpKind::kParameter;
  for (NodeId in : inputs) {
    check_id(in);
    requires_grad = requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(Node{kind, std::move(inputs), std::move(name), std::move(attrs), requires_grad, {}, {}, {}, {}});
  evaluated_ = false;
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::input(const std::string& name) {
  return push(OpKind::kInput, {}, {}, name);
}

template <typename T>
NodeId Graph<T>::constant(Tensor<T> value, const std::string& name) {
  NodeId id = push(OpKind::kConstant, {}, {}, name);
  nodes_[id].value = std::move(value);
  return id;
}

template <typename T>
NodeId Graph<T>::parameter(const std::string& name) {
  if (auto it = parameter_nodes_.find(name); it != parameter_nodes_.end()) return it->second;
  if (params_ == nullptr || !params_->contains(name)) {
    throw ValidationError("graph has no parameter named '" + name + "'");
  }
  NodeId id = push(OpKind::kParameter, {}, {}, name);
  parameter_nodes_[name] = id;
  return id;
}

template <typename T>
NodeId Graph<T>::matmul(NodeId a, NodeId b) {
  return push(OpKind::kMatMul, {a, b});
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  return push(OpKind::kAdd, {a, b});
}

template <typename T>
NodeId Graph<T>::multiply(NodeId a, NodeId b) {
  return push(OpKind::kMultiply, {a, b});
}

template <typename T>
NodeId Graph<T>::scale(NodeId a, T factor) {
  Attrs attrs;
  attrs.scalar = static_cast<double>(factor);
  return push(OpKind::kScale, {a}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::sum(NodeId a) {
  return push(OpKind::kSum, {a});
}

template <typename T>
NodeId Graph<T>::embedding(NodeId table, std::vector<std::int32_t> ids, const std::string& name) {
  Attrs attrs;
  attrs.ids = std::move(ids);
  return push(OpKind::kEmbedding, {table}, std::move(attrs), name);
}

template <typename T>
NodeId Graph<T>::softmax(NodeId logits, std::optional<NodeId> additive_mask) {
  std::vector<NodeId> inputs{logits};
  if (additive_mask) inputs.push_back(*additive_mask);
  return push(OpKind::kSoftmax, std::move(inputs));
}

template <typename T>
NodeId Graph<T>::layer_norm(NodeId x, NodeId gain, NodeId bias, T eps) {
  Attrs attrs;
  attrs.scalar = static_cast<double>(eps);
  return push(OpKind::kLayerNorm, {x, gain, bias}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::gelu(NodeId x) {
  return push(OpKind::kGelu, {x});
}

template <typename T>
NodeId Graph<T>::dropout(NodeId x, T rate, std::uint64_t seed) {
  if (!(rate >= T{0} && rate < T{1})) throw ValidationError("dropout rate must be in [0, 1)");
  Attrs attrs;
  attrs.scalar = static_cast<double>(rate);
  attrs.seed = seed;
  return push(OpKind::kDropout, {x}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::reshape(NodeId x, Shape shape) {
  Attrs attrs;
  attrs.shape = std::move(shape);
  return push(OpKind::kReshape, {x}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::transpose(NodeId x) {
  return push(OpKind::kTranspose, {x});
}

template <typename T>
NodeId Graph<T>::concat_cols(std::vector<NodeId> parts) {
  if (parts.empty()) throw ValidationError("concat of zero tensors");
  return push(OpKind::kConcatCols, std::move(parts));
}

template <typename T>
NodeId Graph<T>::slice_cols(NodeId x, std::size_t begin, std::size_t width) {
  Attrs attrs;
  attrs.begin = begin;
  attrs.width = width;
  return push(OpKind::kSliceCols, {x}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::rope(NodeId x, std::vector<double> positions, double base) {
  Attrs attrs;
  attrs.positions = std::move(positions);
  attrs.scalar = base;
  return push(OpKind::kRope, {x}, std::move(attrs));
}

template <typename T>
NodeId Graph<T>::cross_entropy(NodeId logits, std::vector<std::int32_t> targets, std::vector<std::uint8_t> mask) {
  if (targets.size() != mask.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets but " +
                     std::to_string(mask.size()) + " mask entries");
  }
  Attrs attrs;
  attrs.ids = std::move(targets);
  attrs.mask = std::move(mask);
  return push(OpKind::kCrossEntropy, {logits}, std::move(attrs));
}

template <typename T>
std::vector<std::string> Graph<T>::referenced_parameters() const {
  std::vector<std::string> names;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::kParameter) names.push_back(n.name);
  }
  return names;
}

// ---------------------------------------------------------------------------
// Forward

template <typename T>
std::map<std::string, Tensor<T>> Graph<T>::evaluate(const std::map<std::string, Tensor<T>>& inputs) {
  bound_inputs_ = inputs;
  reevaluate();
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, id] : outputs_) out[name] = nodes_[id].value;
  return out;
}

template <typename T>
void Graph<T>::reevaluate() {
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    forward(id);
    if (debug_checks_ && !nodes_[id].value.all_finite()) {
      throw Error("node " + std::to_string(id) + " (" + op_name(nodes_[id].kind) + "): non-finite value");
    }
  }
  evaluated_ = true;
}

template <typename T>
void Graph<T>::forward(NodeId id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const Tensor<T>& { return nodes_[n.inputs[k]].value; };
  switch (n.kind) {
    case OpKind::kInput: {
      auto it = bound_inputs_.find(n.name);
      if (it == bound_inputs_.end()) fail(id, "input '" + n.name + "' is not bound");
      n.value = it->second;
      break;
    }
    case OpKind::kConstant:
      break;
    case OpKind::kParameter:
      n.value = params_->value(n.name);
      break;
    case OpKind::kMatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      if (a.rank() != 2 || b.rank() != 2) fail(id, "operands must be matrices");
      if (a.dim(1) != b.dim(0)) {
        fail(id, "inner dimensions differ: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
      }
      n.value = Tensor<T>({a.dim(0), b.dim(1)});
      gemm<T>(a.data(), b.data(), n.value.data(), a.dim(0), a.dim(1), b.dim(1), false, false, false);
      break;
    }
    case OpKind::kAdd: {
      const auto& a = in(0);
      const auto& b = in(1);
      n.value = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] += b[i];
      } else if (b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.cols()) {
        const std::size_t cols = a.cols();
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] += b[i % cols];
      } else {
        fail(id, "cannot add " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
      }
      break;
    }
    case OpKind::kMultiply: {
      const auto& a = in(0);
      const auto& b = in(1);
      if (a.shape() != b.shape()) {
        fail(id, "cannot multiply " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
      }
      n.value = a;
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] *= b[i];
      break;
    }
    case OpKind::kScale: {
      n.value = in(0);
      const T f = static_cast<T>(n.attrs.scalar);
      for (auto& v : n.value.data()) v *= f;
      break;
    }
    case OpKind::kSum: {
      T s{0};
      for (T v : in(0).data()) s += v;
      n.value = Tensor<T>::scalar(s);
      break;
    }
    case OpKind::kEmbedding: {
      const auto& table = in(0);
      if (table.rank() != 2) fail(id, "embedding table must be a matrix");
      const std::size_t vocab = table.dim(0);
      const std::size_t width = table.dim(1);
      const auto& ids = n.attrs.ids;
      n.value = Tensor<T>({ids.size(), width});
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
          throw RangeError((n.name.empty() ? std::string("embedding") : n.name) + ": id " + std::to_string(ids[i]) +
                           " at index " + std::to_string(i) + " outside [0, " + std::to_string(vocab) + ")");
        }
        auto src = table.row(static_cast<std::size_t>(ids[i]));
        std::copy(src.begin(), src.end(), n.value.row(i).begin());
      }
      break;
    }
    case OpKind::kSoftmax: {
      const auto& x = in(0);
      if (x.rank() < 1) fail(id, "softmax needs at least one axis");
      const Tensor<T>* mask = n.inputs.size() > 1 ? &in(1) : nullptr;
      if (mask && mask->shape() != x.shape()) {
        fail(id, "mask shape " + shape_string(mask->shape()) + " differs from " + shape_string(x.shape()));
      }
      n.value = Tensor<T>(x.shape());
      const std::size_t cols = x.cols();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const T* xr = x.data().data() + r * cols;
        const T* mr = mask ? mask->data().data() + r * cols : nullptr;
        T* yr = n.value.data().data() + r * cols;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t c = 0; c < cols; ++c) {
          const T v = mr ? xr[c] + mr[c] : xr[c];
          mx = std::max(mx, v);
        }
        if (!std::isfinite(mx)) fail(id, "row " + std::to_string(r) + " has no visible entry");
        T total{0};
        for (std::size_t c = 0; c < cols; ++c) {
          const T v = mr ? xr[c] + mr[c] : xr[c];
          yr[c] = std::exp(v - mx);
          total += yr[c];
        }
        for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& x = in(0);
      const auto& gain = in(1);
      const auto& bias = in(2);
      const std::size_t cols = x.cols();
      if (gain.size() != cols || bias.size() != cols) fail(id, "gain/bias width differs from input width");
      const T eps = static_cast<T>(n.attrs.scalar);
      n.value = Tensor<T>(x.shape());
      n.aux = Tensor<T>(x.shape());       // normalized input
      n.aux2 = Tensor<T>({x.rows()});     // 1/std per row
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto xr = x.row(r);
        T mean{0};
        for (T v : xr) mean += v;
        mean /= static_cast<T>(cols);
        T var{0};
        for (T v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<T>(cols);
        const T inv_std = T{1} / std::sqrt(var + eps);
        n.aux2[r] = inv_std;
        for (std::size_t c = 0; c < cols; ++c) {
          const T xhat = (xr[c] - mean) * inv_std;
          n.aux.at(r, c) = xhat;
          n.value.at(r, c) = xhat * gain[c] + bias[c];
        }
      }
      break;
    }
    case OpKind::kGelu: {
      n.value = in(0);
      for (auto& v : n.value.data()) v = gelu_tanh(v);
      break;
    }
    case OpKind::kDropout: {
      n.value = in(0);
      const T rate = static_cast<T>(n.attrs.scalar);
      if (!training_ || rate == T{0}) {
        n.aux = Tensor<T>();
        break;
      }
      std::mt19937_64 rng(n.attrs.seed);
      n.aux = Tensor<T>(n.value.shape());
      const T keep_scale = T{1} / (T{1} - rate);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        n.aux[i] = u >= static_cast<double>(rate) ? keep_scale : T{0};
        n.value[i] *= n.aux[i];
      }
      break;
    }
    case OpKind::kReshape: {
      const auto& x = in(0);
      if (element_count(n.attrs.shape) != x.size()) {
        fail(id, "cannot reshape " + shape_string(x.shape()) + " to " + shape_string(n.attrs.shape));
      }
      n.value = Tensor<T>(n.attrs.shape, x.storage());
      break;
    }
    case OpKind::kTranspose: {
      const auto& x = in(0);
      if (x.rank() != 2) fail(id, "transpose needs a matrix");
      const std::size_t r = x.dim(0), c = x.dim(1);
      n.value = Tensor<T>({c, r});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) n.value[j * r + i] = x[i * c + j];
      break;
    }
    case OpKind::kConcatCols: {
      const std::size_t rows = in(0).rank() == 2 ? in(0).dim(0) : 0;
      std::size_t total = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const auto& p = in(k);
        if (p.rank() != 2 || p.dim(0) != rows) fail(id, "parts must be matrices with equal row counts");
        total += p.dim(1);
      }
      n.value = Tensor<T>({rows, total});
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const auto& p = in(k);
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy(p.row(r).begin(), p.row(r).end(), n.value.data().begin() + static_cast<std::ptrdiff_t>(r * total + offset));
        }
        offset += p.dim(1);
      }
      break;
    }
    case OpKind::kSliceCols: {
      const auto& x = in(0);
      if (x.rank() != 2 || n.attrs.begin + n.attrs.width > x.dim(1)) {
        fail(id, "column slice [" + std::to_string(n.attrs.begin) + ", +" + std::to_string(n.attrs.width) +
                     ") outside " + shape_string(x.shape()));
      }
      const std::size_t rows = x.dim(0);
      n.value = Tensor<T>({rows, n.attrs.width});
      for (std::size_t r = 0; r < rows; ++r) {
        auto src = x.row(r).subspan(n.attrs.begin, n.attrs.width);
        std::copy(src.begin(), src.end(), n.value.row(r).begin());
      }
      break;
    }
    case OpKind::kRope: {
      const auto& x = in(0);
      if (x.rank() != 2) fail(id, "rope needs a [len x width] matrix");
      if (x.dim(1) % 2 != 0) fail(id, "rope width " + std::to_string(x.dim(1)) + " is odd");
      if (n.attrs.positions.size() != x.dim(0)) fail(id, "positions length differs from row count");
      n.value = x;
      rope_rotate<T>(n.value.data(), x.dim(1), n.attrs.positions, n.attrs.scalar, false);
      break;
    }
    case OpKind::kCrossEntropy: {
      const auto& logits = in(0);
      if (logits.rank() != 2 || logits.dim(0) != n.attrs.ids.size()) {
        fail(id, "logits " + shape_string(logits.shape()) + " do not match " + std::to_string(n.attrs.ids.size()) +
                     " targets");
      }
      const std::size_t vocab = logits.dim(1);
      std::size_t counted = 0;
      double total = 0.0;
      n.aux = Tensor<T>(logits.shape());
      for (std::size_t r = 0; r < logits.dim(0); ++r) {
        if (!n.attrs.mask[r]) continue;
        const auto target = n.attrs.ids[r];
        if (target < 0 || static_cast<std::size_t>(target) >= vocab) {
          throw RangeError("cross_entropy: target " + std::to_string(target) + " at row " + std::to_string(r) +
                           " outside [0, " + std::to_string(vocab) + ")");
        }
        auto lr = logits.row(r);
        const T mx = *std::max_element(lr.begin(), lr.end());
        T z{0};
        for (T v : lr) z += std::exp(v - mx);
        const T log_z = std::log(z) + mx;
        auto pr = n.aux.row(r);
        for (std::size_t c = 0; c < vocab; ++c) pr[c] = std::exp(lr[c] - log_z);
        total += static_cast<double>(log_z - lr[static_cast<std::size_t>(target)]);
        ++counted;
      }
      if (counted == 0) throw ValidationError("no trainable targets");
      n.attrs.width = counted;
      n.value = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(counted)));
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
Tensor<T>& Graph<T>::grad_slot(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::accumulate_gradients(NodeId loss, T seed) {
  check_id(loss);
  if (!evaluated_) throw ValidationError("backward called before evaluate");
  if (nodes_[loss].value.size() != 1) {
    throw ShapeError("backward needs a scalar loss; node " + std::to_string(loss) + " has shape " +
                     shape_string(nodes_[loss].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  grad_slot(loss)[0] = seed;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    backward_node(id);
  }
  // Release intermediate gradients; parameter gradients now live in the set.
  for (auto& n : nodes_) n.grad = Tensor<T>();
}

template <typename T>
std::map<std::string, Tensor<T>> Graph<T>::backward(NodeId loss) {
  if (params_ == nullptr) throw ValidationError("backward on a graph without parameters");
  params_->zero_grad();
  accumulate_gradients(loss, T{1});
  std::map<std::string, Tensor<T>> grads;
  for (const auto& name : params_->names()) grads[name] = params_->grad(name);
  return grads;
}

template <typename T>
void Graph<T>::backward_node(NodeId id) {
  Node& n = nodes_[id];
  const Tensor<T>& g = n.grad;
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
  auto in = [&](std::size_t k) -> const Tensor<T>& { return nodes_[n.inputs[k]].value; };

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kConstant:
      break;
    case OpKind::kParameter: {
      auto& pg = params_->grad(n.name);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      break;
    }
    case OpKind::kMatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      if (wants(0)) {
        auto& ga = grad_slot(n.inputs[0]);
        gemm<T>(g.data(), b.data(), ga.data(), m, p, k, false, true, true);
      }
      if (wants(1)) {
        auto& gb = grad_slot(n.inputs[1]);
        gemm<T>(a.data(), g.data(), gb.data(), k, m, p, true, false, true);
      }
      break;
    }
    case OpKind::kAdd: {
      if (wants(0)) {
        auto& ga = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = grad_slot(n.inputs[1]);
        if (gb.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          const std::size_t cols = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
        }
      }
      break;
    }
    case OpKind::kMultiply: {
      const auto& a = in(0);
      const auto& b = in(1);
      if (wants(0)) {
        auto& ga = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case OpKind::kScale: {
      auto& ga = grad_slot(n.inputs[0]);
      const T f = static_cast<T>(n.attrs.scalar);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f;
      break;
    }
    case OpKind::kSum: {
      auto& ga = grad_slot(n.inputs[0]);
      for (auto& v : ga.data()) v += g[0];
      break;
    }
    case OpKind::kEmbedding: {
      auto& gt = grad_slot(n.inputs[0]);
      const auto& ids = n.attrs.ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto dst = gt.row(static_cast<std::size_t>(ids[i]));
        auto src = g.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (!wants(0)) break;
      auto& gx = grad_slot(n.inputs[0]);
      const std::size_t cols = n.value.cols();
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        const T* y = n.value.data().data() + r * cols;
        const T* gy = g.data().data() + r * cols;
        T dot{0};
        for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
        T* out = gx.data().data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += y[c] * (gy[c] - dot);
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& gain = in(1);
      const std::size_t cols = n.value.cols();
      const std::size_t rows = n.value.rows();
      if (wants(1)) {
        auto& gg = grad_slot(n.inputs[1]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gg[c] += g.at(r, c) * n.aux.at(r, c);
      }
      if (wants(2)) {
        auto& gb = grad_slot(n.inputs[2]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
      }
      if (wants(0)) {
        auto& gx = grad_slot(n.inputs[0]);
        std::vector<T> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_d{0}, mean_dx{0};
          for (std::size_t c = 0; c < cols; ++c) {
            dxhat[c] = g.at(r, c) * gain[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * n.aux.at(r, c);
          }
          mean_d /= static_cast<T>(cols);
          mean_dx /= static_cast<T>(cols);
          const T inv_std = n.aux2[r];
          for (std::size_t c = 0; c < cols; ++c) {
            gx.at(r, c) += inv_std * (dxhat[c] - mean_d - n.aux.at(r, c) * mean_dx);
          }
        }
      }
      break;
    }
    case OpKind::kGelu: {
      auto& gx = grad_slot(n.inputs[0]);
      const auto& x = in(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_tanh_derivative(x[i]);
      break;
    }
    case OpKind::kDropout: {
      auto& gx = grad_slot(n.inputs[0]);
      if (n.aux.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.aux[i];
      }
      break;
    }
    case OpKind::kReshape: {
      auto& gx = grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }
    case OpKind::kTranspose: {
      auto& gx = grad_slot(n.inputs[0]);
      const std::size_t r = gx.dim(0), c = gx.dim(1);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
      break;
    }
    case OpKind::kConcatCols: {
      const std::size_t rows = n.value.dim(0);
      const std::size_t total = n.value.dim(1);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t w = in(k).dim(1);
        if (wants(k)) {
          auto& gp = grad_slot(n.inputs[k]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total + offset + c];
        }
        offset += w;
      }
      break;
    }
    case OpKind::kSliceCols: {
      auto& gx = grad_slot(n.inputs[0]);
      const std::size_t rows = g.dim(0);
      const std::size_t full = gx.dim(1);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n.attrs.width; ++c) gx[r * full + n.attrs.begin + c] += g[r * n.attrs.width + c];
      break;
    }
    case OpKind::kRope: {
      // Rotation is orthogonal: the adjoint is the inverse rotation.
      Tensor<T> back = g;
      rope_rotate<T>(back.data(), back.dim(1), n.attrs.positions, n.attrs.scalar, true);
      auto& gx = grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
      break;
    }
    case OpKind::kCrossEntropy: {
      auto& gl = grad_slot(n.inputs[0]);
      const T scale = g[0] / static_cast<T>(n.attrs.width);
      const std::size_t vocab = gl.dim(1);
      for (std::size_t r = 0; r < gl.dim(0); ++r) {
        if (!n.attrs.mask[r]) continue;
        auto pr = n.aux.row(r);
        auto out = gl.row(r);
        for (std::size_t c = 0; c < vocab; ++c) out[c] += scale * pr[c];
        out[static_cast<std::size_t>(n.attrs.ids[r])] -= scale;
      }
      break;
    }
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace kdial::numerics
