#pragma once

#include <cstddef>
#include <vector>

#include "kdial/corpus/dialogue.hpp"
#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/tokenizer/bpe.hpp"

namespace kdial::corpus {

/// Plain response samples: one per turn t >= 1, with up to `max_context`
/// preceding turns as context.
std::vector<TrainingSample> dialogue_to_samples(const Dialogue& d, std::size_t max_context);

/// Two samples per record: context -> query (or the NO_QUERY decision when the
/// human issued no search), then context (+ knowledge) -> response.
/// Throws ValidationError when exactly one of query/knowledge is empty.
std::vector<TrainingSample> knowledge_record_to_samples(const KnowledgeDialogueRecord& r);

struct SerializeOptions {
  std::size_t min_context = 1;
};

/// Lays a sample out as model input:
///   [SEP utterance]* [knowledge] BOS target EOS
/// Context tokens are type 0, knowledge type 2, and BOS/target/EOS carry the
/// target's type (1 query, 3 response). The responder is role 0; other
/// speakers are numbered by recency. Over-long samples lose their oldest
/// context turns first, then the tail of the knowledge.
model::Sequence serialize_sample(const TrainingSample& s, const tokenizer::Vocabulary& vocab,
                                 const model::ModelConfig& cfg, const SerializeOptions& options = {});

// Same layout for a generation prompt: ends with BOS, no target.
model::Sequence serialize_prompt(const std::vector<Utterance>& context, const std::string& responder,
                                 const std::vector<tokenizer::TokenId>* knowledge, model::Segment target_type,
                                 const tokenizer::Vocabulary& vocab, const model::ModelConfig& cfg,
                                 std::size_t reserve_output, const SerializeOptions& options = {});

}  // namespace kdial::corpus
