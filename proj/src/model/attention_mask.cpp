#include "kdial/model/attention_mask.hpp"

#include <limits>

#include "kdial/common/error.hpp"

namespace kdial::model {

template <typename T>
numerics::Tensor<T> AttentionMask::additive() const {
  numerics::Tensor<T> out({size_, size_});
  for (std::size_t i = 0; i < allowed_.size(); ++i) {
    out[i] = allowed_[i] ? T{0} : -std::numeric_limits<T>::infinity();
  }
  return out;
}

template numerics::Tensor<float> AttentionMask::additive<float>() const;
template numerics::Tensor<double> AttentionMask::additive<double>() const;

AttentionMask build_prefix_mask(std::size_t prefix_len, std::size_t total_len) {
  if (prefix_len > total_len) {
    throw ValidationError("prefix length " + std::to_string(prefix_len) + " exceeds sequence length " +
                          std::to_string(total_len));
  }
  std::vector<std::uint8_t> allowed(total_len * total_len, 0);
  for (std::size_t i = 0; i < total_len; ++i) {
    for (std::size_t j = 0; j < total_len; ++j) {
      allowed[i * total_len + j] = j < prefix_len || (i >= prefix_len && j <= i);
    }
  }
  return AttentionMask(total_len, std::move(allowed));
}

}  // namespace kdial::model
