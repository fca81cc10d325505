#include "kdial/numerics/kernels.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace kdial::numerics {

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k, std::size_t n,
          bool transpose_a, bool transpose_b, bool accumulate) {
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Idx = Eigen::Index;
  const Eigen::Map<const RowMat> A(a.data(), static_cast<Idx>(transpose_a ? k : m),
                                   static_cast<Idx>(transpose_a ? m : k));
  const Eigen::Map<const RowMat> B(b.data(), static_cast<Idx>(transpose_b ? n : k),
                                   static_cast<Idx>(transpose_b ? k : n));
  Eigen::Map<RowMat> C(c.data(), static_cast<Idx>(m), static_cast<Idx>(n));
  if (!accumulate) C.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  if (!transpose_a && !transpose_b) {
    C.noalias() += A * B;
  } else if (transpose_a && !transpose_b) {
    C.noalias() += A.transpose() * B;
  } else if (!transpose_a && transpose_b) {
    C.noalias() += A * B.transpose();
  } else {
    C.noalias() += A.transpose() * B.transpose();
  }
}

template <typename T>
void rope_rotate(std::span<T> rows, std::size_t width, std::span<const double> positions, double base, bool inverse) {
  const std::size_t n_rows = positions.size();
  const std::size_t half = width / 2;
  std::vector<double> theta(half);
  for (std::size_t i = 0; i < half; ++i) {
    theta[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(width));
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    T* x = rows.data() + r * width;
    const double m = positions[r];
    for (std::size_t i = 0; i < half; ++i) {
      const double angle = inverse ? -m * theta[i] : m * theta[i];
      const T c = static_cast<T>(std::cos(angle));
      const T s = static_cast<T>(std::sin(angle));
      const T x0 = x[2 * i];
      const T x1 = x[2 * i + 1];
      x[2 * i] = x0 * c - x1 * s;
      x[2 * i + 1] = x0 * s + x1 * c;
    }
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

template <typename T>
T gelu_tanh(T x) {
  const T inner = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::tanh(inner));
}

template <typename T>
T gelu_tanh_derivative(T x) {
  const T x2 = x * x;
  const T inner = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x2 * x);
  const T t = std::tanh(inner);
  const T d_inner = static_cast<T>(kGeluC) * (static_cast<T>(1) + static_cast<T>(3 * kGeluA) * x2);
  return static_cast<T>(0.5) * (static_cast<T>(1) + t) + static_cast<T>(0.5) * x * (static_cast<T>(1) - t * t) * d_inner;
}

template void gemm<float>(std::span<const float>, std::span<const float>, std::span<float>, std::size_t, std::size_t,
                          std::size_t, bool, bool, bool);
template void gemm<double>(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                           std::size_t, std::size_t, bool, bool, bool);
template void rope_rotate<float>(std::span<float>, std::size_t, std::span<const double>, double, bool);
template void rope_rotate<double>(std::span<double>, std::size_t, std::span<const double>, double, bool);
template float gelu_tanh<float>(float);
template double gelu_tanh<double>(double);
template float gelu_tanh_derivative<float>(float);
template double gelu_tanh_derivative<double>(double);

}  // namespace kdial::numerics
