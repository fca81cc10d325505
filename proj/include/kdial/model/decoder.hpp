#pragma once

#include <span>
#include <vector>

#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/numerics/graph.hpp"

namespace kdial::model {

/// Inference-only forward pass with a key/value cache.
///
/// `start` encodes the input region bidirectionally; each `step` appends one
/// output token that sees the whole input region and every earlier output.
/// Because input positions never attend to outputs, the cached input keys
/// stay valid for the whole generation. Produces the same logits as the
/// graph forward pass over the concatenated sequence.
template <typename T>
class IncrementalDecoder {
 public:
  IncrementalDecoder(const numerics::ParameterSet<T>& params, const ModelConfig& cfg);

  // Encodes seq[0, seq.prefix_len) and clears any cached outputs.
  void start(const Sequence& seq);
  // Appends one token; returns its next-token logits (vocab_size entries).
  std::vector<T> step(tokenizer::TokenId token, std::int32_t type, std::int32_t role, std::int32_t position);

  std::size_t length() const { return length_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  struct LayerWeights {
    const T *ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo, *ln2_g, *ln2_b, *w1, *b1, *w2, *b2;
  };
  struct LayerCache {
    std::vector<T> keys;  // rotated, length_ x embed_dim
    std::vector<T> values;
  };

  // Runs `rows` new positions through the stack; they attend to the cache
  // (after their own keys are appended) without a causal restriction.
  std::vector<T> run(std::vector<T> x, std::span<const std::int32_t> positions, bool want_logits);

  ModelConfig cfg_;
  const T *tok_emb_, *type_emb_, *role_emb_, *lnf_g_, *lnf_b_, *out_w_, *out_b_;
  std::vector<LayerWeights> layers_;
  std::vector<LayerCache> cache_;
  std::size_t length_ = 0;
};

}  // namespace kdial::model
