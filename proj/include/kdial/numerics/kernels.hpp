#pragma once

#include <cstddef>
#include <span>

namespace kdial::numerics {

// C = A(m×k) · B(k×n), with optional transposition of either operand
// (shapes refer to the operands after transposition). `accumulate` adds into C.
template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k, std::size_t n,
          bool transpose_a, bool transpose_b, bool accumulate);

// Rotates consecutive pairs (x[2i], x[2i+1]) of each row by position·base^(-2i/width).
// `inverse` applies the opposite rotation (used by the gradient).
template <typename T>
void rope_rotate(std::span<T> rows, std::size_t width, std::span<const double> positions, double base,
                 bool inverse = false);

template <typename T>
T gelu_tanh(T x);
template <typename T>
T gelu_tanh_derivative(T x);

}  // namespace kdial::numerics
