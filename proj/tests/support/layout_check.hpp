#pragma once

#include <optional>
#include <string>

#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/tokenizer/bpe.hpp"

namespace kdial::testing {

struct LayoutExpectation {
  model::Segment target = model::Segment::kResponse;
  bool knowledge = false;  // type-2 tokens must be present (true) or absent (false)
  bool closed = true;      // target and EOS follow BOS; false for prompts ending at BOS
};

// Checks the serialized layout
//   [SEP utterance]* [knowledge] BOS [target EOS]
// and returns the first violation, if any.
inline std::optional<std::string> check_layout(const model::Sequence& s, const model::ModelConfig& cfg,
                                               const LayoutExpectation& want) {
  using model::Segment;
  using model::type_id;
  try {
    model::validate_sequence(s, cfg);
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
  const std::size_t bos = s.prefix_len;
  if (bos >= s.size() || s.tokens[bos] != tokenizer::kBos) return "no BOS at prefix_len";
  if (s.types[bos] != type_id(want.target)) return "BOS carries the wrong type";
  if (s.roles[bos] != 0) return "BOS role is not 0";
  if (s.size() == 0 || s.tokens[0] != tokenizer::kSep) return "sequence does not open with SEP";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.positions[i] != static_cast<std::int32_t>(i)) return "position " + std::to_string(i) + " out of order";
  }
  std::size_t knowledge = 0;
  bool seen_knowledge = false;
  for (std::size_t i = 0; i < bos; ++i) {
    const auto t = s.types[i];
    if (t == type_id(Segment::kKnowledge)) {
      seen_knowledge = true;
      ++knowledge;
      if (s.roles[i] != 0) return "knowledge token with a nonzero role";
    } else if (t == type_id(Segment::kContext)) {
      if (seen_knowledge) return "context after knowledge";
      if (s.tokens[i] == tokenizer::kSep && i > 0 && s.tokens[i - 1] == tokenizer::kSep) return "empty utterance";
      if (s.tokens[i] != tokenizer::kSep && (i == 0 || s.roles[i] != s.roles[i - 1])) {
        return "role changes inside an utterance";
      }
    } else {
      return "prefix token of type " + std::to_string(t);
    }
    if (s.loss_mask[i]) return "loss target inside the prefix";
    if (s.tokens[i] == tokenizer::kBos || s.tokens[i] == tokenizer::kEos) return "BOS/EOS inside the prefix";
  }
  if (bos > 0 && s.tokens[bos - 1] == tokenizer::kSep) return "empty last utterance";
  if (want.knowledge && knowledge == 0) return "missing knowledge tokens";
  if (!want.knowledge && knowledge > 0) return "unexpected knowledge tokens";
  if (s.loss_mask[bos]) return "BOS is a loss target";
  if (!want.closed) {
    if (s.size() != bos + 1) return "prompt continues past BOS";
    return std::nullopt;
  }
  if (s.size() < bos + 3) return "empty target";
  if (s.tokens.back() != tokenizer::kEos) return "target does not end with EOS";
  for (std::size_t i = bos + 1; i < s.size(); ++i) {
    if (s.types[i] != type_id(want.target)) return "target token with the wrong type";
    if (s.roles[i] != 0) return "target token with a nonzero role";
    if (!s.loss_mask[i]) return "target token not in the loss mask";
    if (i + 1 < s.size() && (s.tokens[i] == tokenizer::kEos || s.tokens[i] == tokenizer::kBos ||
                             s.tokens[i] == tokenizer::kSep)) {
      return "special token inside the target";
    }
  }
  return std::nullopt;
}

}  // namespace kdial::testing
