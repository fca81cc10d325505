#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kdial/numerics/graph.hpp"

namespace kdial::training {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// First and second moments per parameter name, and the number of updates taken.
template <typename T>
struct OptimizerState {
  std::map<std::string, numerics::Tensor<T>> m;
  std::map<std::string, numerics::Tensor<T>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update using the gradients stored in `params`,
/// plus decoupled decay: p -= lr·(m̂/(√v̂+eps) + weight_decay·p).
/// Moments are created on first use. A non-finite gradient throws before
/// anything is modified.
template <typename T>
void adamw_step(numerics::ParameterSet<T>& params, OptimizerState<T>& state, double lr, const AdamWHyper& hyper);

// Scales all gradients so their global L2 norm is at most max_norm; returns the norm before scaling.
template <typename T>
double clip_grad_norm(numerics::ParameterSet<T>& params, double max_norm);

}  // namespace kdial::training
