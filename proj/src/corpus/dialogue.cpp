#include "kdial/corpus/dialogue.hpp"

#include <set>

#include "kdial/common/error.hpp"

namespace kdial::corpus {

using nlohmann::json;

const char* kind_name(DialogueKind kind) {
  return kind == DialogueKind::kSingleParty ? "single-party" : "multi-party";
}

DialogueKind parse_kind(const std::string& name) {
  if (name == "single-party") return DialogueKind::kSingleParty;
  if (name == "multi-party") return DialogueKind::kMultiParty;
  throw ValidationError("unknown dialogue kind '" + name + "'");
}

void validate_dialogue(const Dialogue& d) {
  if (d.utterances.empty()) throw ValidationError("dialogue '" + d.id + "' has no utterances");
  std::set<std::string> speakers;
  for (const auto& u : d.utterances) speakers.insert(u.speaker);
  if (d.kind == DialogueKind::kSingleParty && speakers.size() != 1) {
    throw ValidationError("single-party dialogue '" + d.id + "' has " + std::to_string(speakers.size()) +
                          " speakers");
  }
  if (d.kind == DialogueKind::kMultiParty && speakers.size() < 2) {
    throw ValidationError("multi-party dialogue '" + d.id + "' has a single speaker");
  }
}

void validate_sample(const TrainingSample& s) {
  if (s.output_kind == OutputKind::kQuery && s.knowledge) {
    throw ValidationError("query sample '" + s.source + "' carries knowledge");
  }
  if (s.output_kind == OutputKind::kResponse && !s.target) {
    throw ValidationError("response sample '" + s.source + "' has no target");
  }
  if (s.target && s.target->empty()) throw ValidationError("sample '" + s.source + "' has an empty target");
}

std::string infer_responder(const std::vector<Utterance>& context) {
  if (context.size() >= 2) return context[context.size() - 2].speaker;
  return "__responder__";
}

json to_json(const Utterance& u) { return {{"speaker", u.speaker}, {"text", u.text}}; }

namespace {

json utterances_json(const std::vector<Utterance>& us) {
  json a = json::array();
  for (const auto& u : us) a.push_back(to_json(u));
  return a;
}

json optional_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

template <typename F>
auto with_context(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const Dialogue& d) {
  return {{"id", d.id}, {"kind", kind_name(d.kind)}, {"utterances", utterances_json(d.utterances)}};
}

json to_json(const TrainingSample& s) {
  json j = {{"context", utterances_json(s.context)},
            {"query", optional_json(s.query)},
            {"knowledge", optional_json(s.knowledge)},
            {"output_kind", s.output_kind == OutputKind::kQuery ? "query" : "response"},
            {"target", optional_json(s.target)},
            {"responder", s.responder}};
  if (!s.source.empty()) j["source"] = s.source;
  return j;
}

json to_json(const KnowledgeDialogueRecord& r) {
  json j = {{"id", r.id},
            {"context", utterances_json(r.context)},
            {"human_query", r.human_query},
            {"retrieved_knowledge", r.retrieved_knowledge},
            {"response", r.response}};
  if (!r.responder.empty()) j["responder"] = r.responder;
  return j;
}

std::vector<Utterance> utterances_from_json(const json& j) {
  return with_context("utterance list", [&] {
    std::vector<Utterance> out;
    for (const auto& u : j) {
      if (u.is_string()) {
        out.push_back({"", u.get<std::string>()});
      } else {
        out.push_back({u.value("speaker", ""), u.at("text").get<std::string>()});
      }
    }
    return out;
  });
}

Dialogue dialogue_from_json(const json& j) {
  return with_context("dialogue", [&] {
    Dialogue d;
    d.id = j.value("id", "");
    d.kind = parse_kind(j.at("kind").get<std::string>());
    d.utterances = utterances_from_json(j.at("utterances"));
    validate_dialogue(d);
    return d;
  });
}

TrainingSample sample_from_json(const json& j) {
  return with_context("sample", [&] {
    TrainingSample s;
    s.context = utterances_from_json(j.at("context"));
    s.query = optional_string(j, "query");
    s.knowledge = optional_string(j, "knowledge");
    const auto kind = j.at("output_kind").get<std::string>();
    if (kind == "query") {
      s.output_kind = OutputKind::kQuery;
    } else if (kind == "response") {
      s.output_kind = OutputKind::kResponse;
    } else {
      throw ValidationError("unknown output_kind '" + kind + "'");
    }
    s.target = optional_string(j, "target");
    s.responder = j.value("responder", "");
    if (s.responder.empty()) s.responder = infer_responder(s.context);
    s.source = j.value("source", "");
    validate_sample(s);
    return s;
  });
}

KnowledgeDialogueRecord knowledge_record_from_json(const json& j) {
  return with_context("knowledge record", [&] {
    KnowledgeDialogueRecord r;
    r.id = j.value("id", "");
    r.context = utterances_from_json(j.at("context"));
    r.human_query = j.value("human_query", "");
    r.retrieved_knowledge = j.value("retrieved_knowledge", "");
    r.response = j.at("response").get<std::string>();
    r.responder = j.value("responder", "");
    return r;
  });
}

}  // namespace kdial::corpus
