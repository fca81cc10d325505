#include "kdial/inference/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kdial/common/error.hpp"
#include "kdial/model/decoder.hpp"

namespace kdial::inference {

void DecodeConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("decode: p must be in (0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("decode: temperature must be positive");
  if (max_new_tokens < 1) throw ValidationError("decode: max_new_tokens must be at least 1");
}

DecodeConfig DecodeConfig::chat() {
  DecodeConfig c;
  c.strategy = Strategy::kTopP;
  c.p = 0.9;
  c.temperature = 1.0;
  return c;
}

Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "top-p" || name == "top_p") return Strategy::kTopP;
  throw ValidationError("unknown decoding strategy '" + name + "' (expected greedy or top-p)");
}

template <typename T>
tokenizer::TokenId pick_token(std::vector<T> logits, const DecodeConfig& cfg, std::mt19937_64& rng) {
  for (tokenizer::TokenId banned : {tokenizer::kPad, tokenizer::kBos, tokenizer::kSep}) {
    if (static_cast<std::size_t>(banned) < logits.size()) logits[banned] = -std::numeric_limits<T>::infinity();
  }
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  // Descending logit, ascending id on ties.
  auto better = [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); };
  if (cfg.strategy == Strategy::kGreedy) {
    return static_cast<tokenizer::TokenId>(*std::min_element(order.begin(), order.end(), better));
  }
  std::sort(order.begin(), order.end(), better);
  const double top = static_cast<double>(logits[order[0]]);
  std::vector<double> probs(order.size());
  double z = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    probs[i] = std::exp((static_cast<double>(logits[order[i]]) - top) / cfg.temperature);
    z += probs[i];
  }
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < order.size()) {
    mass += probs[keep] / z;
    ++keep;
    if (mass >= cfg.p) break;
  }
  double kept = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept += probs[i];
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * kept;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<tokenizer::TokenId>(order[i]);
  }
  return static_cast<tokenizer::TokenId>(order[keep - 1]);
}

template <typename T>
std::vector<tokenizer::TokenId> decode(const numerics::ParameterSet<T>& params, const model::ModelConfig& cfg,
                                       const model::Sequence& prompt, const DecodeConfig& decode_cfg) {
  decode_cfg.validate();
  if (prompt.size() == 0 || prompt.tokens.back() != tokenizer::kBos) {
    throw ValidationError("decode: prompt must end with BOS");
  }
  if (prompt.size() >= cfg.max_len) {
    throw ValidationError("decode: prompt length " + std::to_string(prompt.size()) + " leaves no room below max_len " +
                          std::to_string(cfg.max_len));
  }
  model::IncrementalDecoder<T> dec(params, cfg);
  dec.start(prompt);
  std::vector<T> logits;
  for (std::size_t i = prompt.prefix_len; i < prompt.size(); ++i) {
    logits = dec.step(prompt.tokens[i], prompt.types[i], prompt.roles[i], prompt.positions[i]);
  }
  const std::int32_t type = prompt.types.back();
  std::mt19937_64 rng(decode_cfg.seed);
  std::vector<tokenizer::TokenId> out;
  while (true) {
    const auto token = pick_token(std::move(logits), decode_cfg, rng);
    out.push_back(token);
    if (token == tokenizer::kEos || out.size() >= decode_cfg.max_new_tokens) break;
    // The picked token occupies position dec.length(); stop once that is the last slot.
    if (dec.length() + 1 >= cfg.max_len) break;
    logits = dec.step(token, type, 0, static_cast<std::int32_t>(dec.length()));
  }
  return out;
}

template tokenizer::TokenId pick_token<float>(std::vector<float>, const DecodeConfig&, std::mt19937_64&);
template tokenizer::TokenId pick_token<double>(std::vector<double>, const DecodeConfig&, std::mt19937_64&);
template std::vector<tokenizer::TokenId> decode<float>(const numerics::ParameterSet<float>&, const model::ModelConfig&,
                                                       const model::Sequence&, const DecodeConfig&);
template std::vector<tokenizer::TokenId> decode<double>(const numerics::ParameterSet<double>&,
                                                        const model::ModelConfig&, const model::Sequence&,
                                                        const DecodeConfig&);

}  // namespace kdial::inference
