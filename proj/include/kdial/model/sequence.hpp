#pragma once

#include <cstdint>
#include <vector>

#include "kdial/model/config.hpp"
#include "kdial/tokenizer/bpe.hpp"

namespace kdial::model {

// Segment type ids fed to the type embedding.
enum class Segment : std::int32_t { kContext = 0, kQuery = 1, kKnowledge = 2, kResponse = 3 };

inline std::int32_t type_id(Segment s) { return static_cast<std::int32_t>(s); }

/// One model input: parallel token/type/role/position arrays. Positions
/// [0, prefix_len) form the bidirectional input region; the rest is
/// generated left to right. loss_mask[j] marks tokens that are prediction
/// targets (predicted from position j - 1).
struct Sequence {
  std::vector<tokenizer::TokenId> tokens;
  std::vector<std::int32_t> types;
  std::vector<std::int32_t> roles;
  std::vector<std::int32_t> positions;
  std::size_t prefix_len = 0;
  std::vector<std::uint8_t> loss_mask;

  std::size_t size() const { return tokens.size(); }
  std::size_t target_count() const;
  void push_back(tokenizer::TokenId token, Segment type, std::int32_t role, bool is_target);

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

// Throws ValidationError describing the first broken invariant.
void validate_sequence(const Sequence& seq, const ModelConfig& cfg);

// Next-token targets: row i predicts tokens[i + 1], counted when loss_mask[i + 1].
struct ShiftedTargets {
  std::vector<std::int32_t> targets;
  std::vector<std::uint8_t> mask;
};
ShiftedTargets shift_targets(const Sequence& seq);

}  // namespace kdial::model
