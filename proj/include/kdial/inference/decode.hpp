#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/numerics/graph.hpp"

namespace kdial::inference {

enum class Strategy { kGreedy, kTopP };

struct DecodeConfig {
  Strategy strategy = Strategy::kGreedy;
  double p = 0.9;
  double temperature = 1.0;
  std::size_t max_new_tokens = 64;
  std::uint64_t seed = 0;

  void validate() const;
  // Top-p 0.9 at temperature 1 for interactive use.
  static DecodeConfig chat();
};

Strategy parse_strategy(const std::string& name);

/// Generates after a prompt that ends with BOS (see serialize_prompt). New
/// tokens take the BOS type and role 0. Stops after EOS (included in the
/// result), after max_new_tokens, or when the sequence reaches max_len.
/// PAD, BOS and SEP are never produced. Throws ValidationError when the
/// prompt leaves no room for a new token.
template <typename T>
std::vector<tokenizer::TokenId> decode(const numerics::ParameterSet<T>& params, const model::ModelConfig& cfg,
                                       const model::Sequence& prompt, const DecodeConfig& decode_cfg);

// Picks the next token from a logit row. Greedy ties go to the lowest id.
template <typename T>
tokenizer::TokenId pick_token(std::vector<T> logits, const DecodeConfig& cfg, std::mt19937_64& rng);

}  // namespace kdial::inference
