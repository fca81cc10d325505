#include "kdial/inference/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "kdial/common/error.hpp"
#include "kdial/corpus/samples.hpp"
#include "kdial/model/checkpoint.hpp"

namespace kdial::inference {

using model::Segment;
using tokenizer::TokenId;

DialogueModel DialogueModel::load(const std::string& checkpoint_path, const std::string& vocab_path) {
  DialogueModel m;
  auto loaded = model::load_model<float>(checkpoint_path);
  m.config = loaded.config;
  m.params = std::move(loaded.params);
  m.vocab = tokenizer::Vocabulary::load(vocab_path);
  if (m.vocab.size() > m.config.vocab_size) {
    throw ValidationError("vocabulary has " + std::to_string(m.vocab.size()) + " tokens but the model only " +
                          std::to_string(m.config.vocab_size));
  }
  return m;
}

namespace {

std::vector<corpus::Utterance> recent(const std::vector<corpus::Utterance>& context, std::size_t max_context) {
  if (max_context == 0 || context.size() <= max_context) return context;
  return {context.end() - static_cast<std::ptrdiff_t>(max_context), context.end()};
}

std::size_t reserve_for(const model::ModelConfig& cfg, const DecodeConfig& d) {
  return std::min(d.max_new_tokens, cfg.max_len / 4);
}

std::string decode_text(const tokenizer::Vocabulary& vocab, std::vector<TokenId> ids) {
  if (!ids.empty() && ids.back() == tokenizer::kEos) ids.pop_back();
  return vocab.decode(ids);
}

}  // namespace

std::optional<std::string> generate_query(const DialogueModel& m, const std::vector<corpus::Utterance>& context,
                                          const std::string& responder, const DecodeConfig& cfg,
                                          std::size_t* token_count) {
  if (context.empty()) throw ValidationError("generate_query: empty context");
  const auto prompt =
      corpus::serialize_prompt(context, responder, nullptr, Segment::kQuery, m.vocab, m.config, reserve_for(m.config, cfg));
  const auto ids = decode(m.params, m.config, prompt, cfg);
  if (token_count) *token_count = ids.size();
  if (ids.front() == tokenizer::kNoQuery) return std::nullopt;
  return decode_text(m.vocab, ids);
}

TurnTrace respond(const DialogueModel& m, const std::vector<corpus::Utterance>& full_context,
                  const std::string& responder, const knowledge::Index* store, const PipelineConfig& cfg) {
  if (full_context.empty()) throw ValidationError("respond: empty context");
  const auto started = std::chrono::steady_clock::now();
  TurnTrace trace;
  trace.speaker = responder;
  trace.context = recent(full_context, cfg.max_context);

  trace.query_attempted = true;
  trace.query = generate_query(m, trace.context, responder, cfg.query_decode, &trace.query_tokens);

  std::vector<TokenId> knowledge_ids;
  if (trace.query && store != nullptr) {
    try {
      const auto hits = store->search(*trace.query, std::max<std::size_t>(cfg.top_k, 1));
      std::vector<RetrievedDoc> docs;
      std::string text;
      for (const auto& h : hits) {
        docs.push_back({h.doc_id, h.score, h.title, h.snippet});
        if (!text.empty()) text += ' ';
        text += h.snippet;
      }
      trace.retrieval = std::move(docs);
      if (!text.empty()) {
        knowledge_ids = m.vocab.encode(text);
        if (knowledge_ids.size() > cfg.knowledge_tokens) knowledge_ids.resize(cfg.knowledge_tokens);
      }
    } catch (const std::exception& e) {
      trace.retrieval_failed = true;
      trace.retrieval_error = e.what();
      trace.retrieval.reset();
      knowledge_ids.clear();
    }
  }

  trace.response_prompt = corpus::serialize_prompt(trace.context, responder,
                                                   knowledge_ids.empty() ? nullptr : &knowledge_ids,
                                                   Segment::kResponse, m.vocab, m.config,
                                                   reserve_for(m.config, cfg.response_decode));
  std::vector<TokenId> kept;
  for (std::size_t i = 0; i < trace.response_prompt.size(); ++i) {
    if (trace.response_prompt.types[i] == model::type_id(Segment::kKnowledge)) kept.push_back(trace.response_prompt.tokens[i]);
  }
  trace.knowledge_token_count = kept.size();
  if (!kept.empty()) trace.knowledge = m.vocab.decode(kept);
  trace.prompt_tokens = trace.response_prompt.size();
  const auto ids = decode(m.params, m.config, trace.response_prompt, cfg.response_decode);
  trace.response_tokens = ids.size();
  trace.response = decode_text(m.vocab, ids);
  trace.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  trace.validate();
  return trace;
}

void TurnTrace::validate() const {
  if (retrieval && !query) throw ValidationError("trace: retrieval results without a query");
  if (knowledge && !retrieval) throw ValidationError("trace: knowledge without retrieval results");
  if (!query) {
    for (auto t : response_prompt.types) {
      if (t == model::type_id(Segment::kKnowledge)) throw ValidationError("trace: knowledge tokens without a query");
    }
  }
  if (retrieval_failed && retrieval) throw ValidationError("trace: failed retrieval still has results");
}

nlohmann::json TurnTrace::to_json(bool with_timing) const {
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& u : context) ctx.push_back(corpus::to_json(u));
  nlohmann::json j = {{"turn", turn},
                      {"speaker", speaker},
                      {"context", ctx},
                      {"query_attempted", query_attempted},
                      {"query", query ? nlohmann::json(*query) : nlohmann::json(nullptr)},
                      {"knowledge", knowledge ? nlohmann::json(*knowledge) : nlohmann::json(nullptr)},
                      {"response", response},
                      {"counters",
                       {{"query_tokens", query_tokens},
                        {"knowledge_tokens", knowledge_token_count},
                        {"prompt_tokens", prompt_tokens},
                        {"response_tokens", response_tokens}}}};
  if (retrieval) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : *retrieval) {
      hits.push_back({{"doc_id", h.doc_id}, {"score", h.score}, {"title", h.title}, {"snippet", h.snippet}});
    }
    j["retrieval"] = hits;
  } else {
    j["retrieval"] = nullptr;
  }
  if (retrieval_failed) {
    j["retrieval_failed"] = true;
    j["retrieval_error"] = retrieval_error;
  }
  if (with_timing) j["latency_ms"] = latency_ms;
  return j;
}

std::vector<corpus::Utterance> SelfChatLog::utterances() const {
  std::vector<corpus::Utterance> out;
  for (const auto& t : turns) out.push_back({t.speaker, t.response});
  return out;
}

SelfChatLog self_chat(const DialogueModel& m, const std::string& topic, std::size_t rounds,
                      const knowledge::Index* store, const PipelineConfig& cfg) {
  if (rounds < 1) throw ValidationError("self_chat: rounds must be at least 1");
  if (topic.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("self_chat: empty topic");
  SelfChatLog log;
  log.topic = topic;
  TurnTrace opening;
  opening.speaker = "A";
  opening.response = topic;
  log.turns.push_back(std::move(opening));
  std::vector<corpus::Utterance> history = {{"A", topic}};
  for (std::size_t i = 1; i <= 2 * rounds; ++i) {
    const std::string speaker = i % 2 == 1 ? "B" : "A";
    PipelineConfig turn_cfg = cfg;
    turn_cfg.query_decode.seed = cfg.query_decode.seed + i;
    turn_cfg.response_decode.seed = cfg.response_decode.seed + i;
    auto trace = respond(m, history, speaker, store, turn_cfg);
    trace.turn = i;
    history.push_back({speaker, trace.response});
    log.turns.push_back(std::move(trace));
  }
  return log;
}

}  // namespace kdial::inference
