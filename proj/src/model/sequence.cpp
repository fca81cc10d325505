#include "kdial/model/sequence.hpp"

#include <string>

#include "kdial/common/error.hpp"

namespace kdial::model {

std::size_t Sequence::target_count() const {
  std::size_t n = 0;
  for (auto m : loss_mask) n += m != 0;
  return n;
}

void Sequence::push_back(tokenizer::TokenId token, Segment type, std::int32_t role, bool is_target) {
  positions.push_back(static_cast<std::int32_t>(tokens.size()));
  tokens.push_back(token);
  types.push_back(type_id(type));
  roles.push_back(role);
  loss_mask.push_back(is_target ? 1 : 0);
}

void validate_sequence(const Sequence& seq, const ModelConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ValidationError("sequence: " + msg); };
  const std::size_t n = seq.tokens.size();
  if (seq.types.size() != n || seq.roles.size() != n || seq.positions.size() != n || seq.loss_mask.size() != n) {
    fail("array lengths differ (tokens " + std::to_string(n) + ", types " + std::to_string(seq.types.size()) +
         ", roles " + std::to_string(seq.roles.size()) + ", positions " + std::to_string(seq.positions.size()) +
         ", loss_mask " + std::to_string(seq.loss_mask.size()) + ")");
  }
  if (n == 0) fail("empty");
  if (n > cfg.max_len) fail("length " + std::to_string(n) + " exceeds max_len " + std::to_string(cfg.max_len));
  if (seq.prefix_len > n) fail("prefix_len " + std::to_string(seq.prefix_len) + " exceeds length " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto at = " at position " + std::to_string(i);
    if (seq.tokens[i] < 0 || static_cast<std::size_t>(seq.tokens[i]) >= cfg.vocab_size) {
      fail("token id " + std::to_string(seq.tokens[i]) + at + " outside vocabulary of " +
           std::to_string(cfg.vocab_size));
    }
    if (seq.types[i] < 0 || static_cast<std::size_t>(seq.types[i]) >= cfg.type_count) {
      fail("type id " + std::to_string(seq.types[i]) + at + " out of range");
    }
    if (seq.roles[i] < 0 || static_cast<std::size_t>(seq.roles[i]) >= cfg.role_count) {
      fail("role id " + std::to_string(seq.roles[i]) + at + " out of range");
    }
    if (seq.positions[i] < 0) fail("negative position" + at);
    if (seq.loss_mask[i] && i < seq.prefix_len) fail("loss target" + at + " lies inside the prefix");
  }
}

ShiftedTargets shift_targets(const Sequence& seq) {
  ShiftedTargets out;
  const std::size_t n = seq.tokens.size();
  out.targets.assign(n, tokenizer::kPad);
  out.mask.assign(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.targets[i] = seq.tokens[i + 1];
    out.mask[i] = seq.loss_mask[i + 1];
  }
  return out;
}

}  // namespace kdial::model
