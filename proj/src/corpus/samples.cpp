#include "kdial/corpus/samples.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "kdial/common/error.hpp"
#include "kdial/common/log.hpp"

namespace kdial::corpus {

using model::Segment;
using model::Sequence;
using tokenizer::TokenId;

std::vector<TrainingSample> dialogue_to_samples(const Dialogue& d, std::size_t max_context) {
  if (max_context == 0) throw ValidationError("max_context must be at least 1");
  std::vector<TrainingSample> out;
  for (std::size_t t = 1; t < d.utterances.size(); ++t) {
    TrainingSample s;
    const std::size_t begin = t > max_context ? t - max_context : 0;
    s.context.assign(d.utterances.begin() + static_cast<std::ptrdiff_t>(begin),
                     d.utterances.begin() + static_cast<std::ptrdiff_t>(t));
    s.output_kind = OutputKind::kResponse;
    s.target = d.utterances[t].text;
    s.responder = d.utterances[t].speaker;
    s.source = d.id + "#" + std::to_string(t);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> knowledge_record_to_samples(const KnowledgeDialogueRecord& r) {
  if (r.human_query.empty() != r.retrieved_knowledge.empty()) {
    throw ValidationError("knowledge record '" + r.id + "': " +
                          (r.human_query.empty() ? "knowledge without a query" : "query without knowledge"));
  }
  if (r.response.empty()) throw ValidationError("knowledge record '" + r.id + "' has an empty response");
  const std::string responder = r.responder.empty() ? infer_responder(r.context) : r.responder;
  TrainingSample query;
  query.context = r.context;
  query.output_kind = OutputKind::kQuery;
  if (!r.human_query.empty()) query.target = r.human_query;
  query.responder = responder;
  query.source = r.id;

  TrainingSample response;
  response.context = r.context;
  if (!r.human_query.empty()) {
    response.query = r.human_query;
    response.knowledge = r.retrieved_knowledge;
  }
  response.output_kind = OutputKind::kResponse;
  response.target = r.response;
  response.responder = responder;
  response.source = r.id;
  return {std::move(query), std::move(response)};
}

namespace {

struct Layout {
  std::vector<std::vector<TokenId>> context;
  std::vector<std::string> speakers;
  std::vector<TokenId> knowledge;
  Segment target_type = Segment::kResponse;
  std::vector<TokenId> target;
  bool close = true;           // append target + EOS
  std::size_t reserve = 0;     // room left for generation
};

std::size_t context_length(const Layout& l) {
  std::size_t n = 0;
  for (const auto& u : l.context) n += u.size() + 1;
  return n;
}

std::size_t total_length(const Layout& l) {
  return context_length(l) + l.knowledge.size() + 1 + (l.close ? l.target.size() + 1 : 0) + l.reserve;
}

Sequence build(Layout l, const std::string& responder, const model::ModelConfig& cfg, std::size_t min_context) {
  const std::size_t original_context = l.context.size();
  const std::size_t original_knowledge = l.knowledge.size();
  const std::size_t floor = std::max<std::size_t>(min_context, 1);
  while (total_length(l) > cfg.max_len && l.context.size() > floor) {
    l.context.erase(l.context.begin());
    l.speakers.erase(l.speakers.begin());
  }
  if (total_length(l) > cfg.max_len && !l.knowledge.empty()) {
    const std::size_t excess = total_length(l) - cfg.max_len;
    l.knowledge.resize(l.knowledge.size() > excess ? l.knowledge.size() - excess : 0);
  }
  if (total_length(l) > cfg.max_len) {
    std::ostringstream msg;
    msg << "sample does not fit max_len " << cfg.max_len << " after truncation: context [";
    for (std::size_t i = 0; i < l.context.size(); ++i) msg << (i ? ", " : "") << l.context[i].size() + 1;
    msg << "] (of " << original_context << " turns), knowledge " << l.knowledge.size() << " (of "
        << original_knowledge << "), target " << (l.close ? l.target.size() + 2 : 1);
    if (l.reserve) msg << ", reserved " << l.reserve;
    throw ValidationError(msg.str());
  }

  // Roles: responder 0, everybody else by recency.
  std::map<std::string, std::int32_t> roles;
  roles[responder] = 0;
  std::int32_t next_role = 1;
  bool capped = false;
  std::vector<std::int32_t> context_roles(l.speakers.size());
  for (std::size_t i = l.speakers.size(); i-- > 0;) {
    auto it = roles.find(l.speakers[i]);
    if (it == roles.end()) {
      std::int32_t role = next_role++;
      if (static_cast<std::size_t>(role) >= cfg.role_count) {
        role = static_cast<std::int32_t>(cfg.role_count) - 1;
        capped = true;
      }
      it = roles.emplace(l.speakers[i], role).first;
    }
    context_roles[i] = it->second;
  }
  if (capped) log::warning("more speakers than role ids; extra speakers share role " + std::to_string(cfg.role_count - 1));

  Sequence seq;
  for (std::size_t i = 0; i < l.context.size(); ++i) {
    seq.push_back(tokenizer::kSep, Segment::kContext, context_roles[i], false);
    for (auto t : l.context[i]) seq.push_back(t, Segment::kContext, context_roles[i], false);
  }
  for (auto t : l.knowledge) seq.push_back(t, Segment::kKnowledge, 0, false);
  seq.prefix_len = seq.size();
  seq.push_back(tokenizer::kBos, l.target_type, 0, false);
  if (l.close) {
    for (auto t : l.target) seq.push_back(t, l.target_type, 0, true);
    seq.push_back(tokenizer::kEos, l.target_type, 0, true);
  }
  model::validate_sequence(seq, cfg);
  return seq;
}

Layout context_layout(const std::vector<Utterance>& context, const tokenizer::Vocabulary& vocab) {
  Layout l;
  for (const auto& u : context) {
    l.context.push_back(vocab.encode(u.text));
    l.speakers.push_back(u.speaker);
  }
  return l;
}

}  // namespace

Sequence serialize_sample(const TrainingSample& s, const tokenizer::Vocabulary& vocab, const model::ModelConfig& cfg,
                          const SerializeOptions& options) {
  validate_sample(s);
  Layout l = context_layout(s.context, vocab);
  if (s.knowledge && s.output_kind == OutputKind::kResponse) l.knowledge = vocab.encode(*s.knowledge);
  l.target_type = s.output_kind == OutputKind::kQuery ? Segment::kQuery : Segment::kResponse;
  l.target = s.target ? vocab.encode(*s.target) : std::vector<TokenId>{tokenizer::kNoQuery};
  if (l.target.empty()) throw ValidationError("sample '" + s.source + "' target encodes to no tokens");
  const std::string responder = s.responder.empty() ? infer_responder(s.context) : s.responder;
  return build(std::move(l), responder, cfg, options.min_context);
}

Sequence serialize_prompt(const std::vector<Utterance>& context, const std::string& responder,
                          const std::vector<TokenId>* knowledge, Segment target_type,
                          const tokenizer::Vocabulary& vocab, const model::ModelConfig& cfg,
                          std::size_t reserve_output, const SerializeOptions& options) {
  Layout l = context_layout(context, vocab);
  if (knowledge != nullptr) l.knowledge = *knowledge;
  l.target_type = target_type;
  l.close = false;
  l.reserve = reserve_output;
  return build(std::move(l), responder, cfg, options.min_context);
}

}  // namespace kdial::corpus
