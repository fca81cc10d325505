#include "kdial/training/optimizer.hpp"

#include <cmath>

#include "kdial/common/error.hpp"

namespace kdial::training {

template <typename T>
void adamw_step(numerics::ParameterSet<T>& params, OptimizerState<T>& state, double lr, const AdamWHyper& h) {
  for (const auto& name : params.names()) {
    const auto& g = params.grad(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw Error("non-finite gradient in '" + name + "' at index " + std::to_string(i) + "; step aborted");
      }
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (const auto& name : params.names()) {
    auto& p = params.value(name);
    const auto& g = params.grad(name);
    auto& m = state.m.try_emplace(name, numerics::Tensor<T>(p.shape())).first->second;
    auto& v = state.v.try_emplace(name, numerics::Tensor<T>(p.shape())).first->second;
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw ShapeError("optimizer moments for '" + name + "' do not match the parameter shape");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = h.beta1 * static_cast<double>(m[i]) + (1.0 - h.beta1) * gi;
      const double vi = h.beta2 * static_cast<double>(v[i]) + (1.0 - h.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + h.eps);
      const double pi = static_cast<double>(p[i]);
      p[i] = static_cast<T>(pi - lr * (update + h.weight_decay * pi));
    }
  }
}

template <typename T>
double clip_grad_norm(numerics::ParameterSet<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& name : params.names()) {
    for (T g : params.grad(name).data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& name : params.names()) {
      for (auto& g : params.grad(name).data()) g *= scale;
    }
  }
  return norm;
}

template void adamw_step<float>(numerics::ParameterSet<float>&, OptimizerState<float>&, double, const AdamWHyper&);
template void adamw_step<double>(numerics::ParameterSet<double>&, OptimizerState<double>&, double, const AdamWHyper&);
template double clip_grad_norm<float>(numerics::ParameterSet<float>&, double);
template double clip_grad_norm<double>(numerics::ParameterSet<double>&, double);

}  // namespace kdial::training
