#pragma once

#include <cstdint>
#include <vector>

#include "kdial/numerics/tensor.hpp"

namespace kdial::model {

/// Boolean visibility matrix; row = query position, column = key position.
class AttentionMask {
 public:
  AttentionMask(std::size_t size, std::vector<std::uint8_t> allowed) : size_(size), allowed_(std::move(allowed)) {}

  std::size_t size() const { return size_; }
  bool operator()(std::size_t query, std::size_t key) const { return allowed_[query * size_ + key] != 0; }

  // 0 where visible, -inf where hidden.
  template <typename T>
  numerics::Tensor<T> additive() const;

 private:
  std::size_t size_;
  std::vector<std::uint8_t> allowed_;
};

/// Prefix-LM visibility: key j is visible from query i iff j lies in the
/// prefix, or i is in the output region and j <= i.
AttentionMask build_prefix_mask(std::size_t prefix_len, std::size_t total_len);

}  // namespace kdial::model
