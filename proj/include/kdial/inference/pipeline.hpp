#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/corpus/dialogue.hpp"
#include "kdial/inference/decode.hpp"
#include "kdial/knowledge/index.hpp"
#include "kdial/model/config.hpp"
#include "kdial/numerics/graph.hpp"
#include "kdial/tokenizer/bpe.hpp"

namespace kdial::inference {

/// Weights, shape and vocabulary of a trained dialogue model.
struct DialogueModel {
  model::ModelConfig config;
  numerics::ParameterSet<float> params;
  tokenizer::Vocabulary vocab;

  static DialogueModel load(const std::string& checkpoint_path, const std::string& vocab_path);
};

struct PipelineConfig {
  DecodeConfig query_decode;
  DecodeConfig response_decode;
  std::size_t top_k = 1;
  std::size_t knowledge_tokens = 128;  // model tokens of retrieved text kept
  std::size_t max_context = 8;         // most recent turns shown to the model
};

struct RetrievedDoc {
  std::string doc_id;
  double score = 0.0;
  std::string title;
  std::string snippet;
};

/// What happened in one turn. `retrieval` is set only when a real query was
/// issued against a store.
struct TurnTrace {
  std::size_t turn = 0;
  std::string speaker;
  std::vector<corpus::Utterance> context;
  bool query_attempted = false;
  std::optional<std::string> query;  // absent: NO_QUERY or nothing attempted
  std::optional<std::vector<RetrievedDoc>> retrieval;
  bool retrieval_failed = false;
  std::string retrieval_error;
  std::optional<std::string> knowledge;
  std::string response;
  std::size_t query_tokens = 0;
  std::size_t knowledge_token_count = 0;
  std::size_t prompt_tokens = 0;
  std::size_t response_tokens = 0;
  double latency_ms = 0.0;
  model::Sequence response_prompt;  // serialized input of the response step

  nlohmann::json to_json(bool with_timing = false) const;
  // Throws ValidationError when the trace breaks its own invariants.
  void validate() const;
};

/// Decodes a query (type 1). Returns nullopt when the first generated token
/// is NO_QUERY. `token_count` receives the number of generated tokens.
std::optional<std::string> generate_query(const DialogueModel& m, const std::vector<corpus::Utterance>& context,
                                          const std::string& responder, const DecodeConfig& cfg,
                                          std::size_t* token_count = nullptr);

/// Query, optional retrieval, then a response conditioned on the retrieved
/// snippets (type 2). With no store, no query, an empty result, or a failed
/// search the response is generated without knowledge.
TurnTrace respond(const DialogueModel& m, const std::vector<corpus::Utterance>& context,
                  const std::string& responder, const knowledge::Index* store, const PipelineConfig& cfg);

struct SelfChatLog {
  std::string topic;
  std::vector<TurnTrace> turns;  // turns[0] is the topic itself, spoken by "A"
  std::vector<corpus::Utterance> utterances() const;
};

/// The model speaks for both "A" and "B": the topic opens as A, then
/// 2·rounds generated turns alternate B, A, ... Each turn sees the
/// conversation from the current speaker's side (that speaker is role 0).
SelfChatLog self_chat(const DialogueModel& m, const std::string& topic, std::size_t rounds,
                      const knowledge::Index* store, const PipelineConfig& cfg);

}  // namespace kdial::inference
