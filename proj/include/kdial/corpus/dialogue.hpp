#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kdial::corpus {

struct Utterance {
  std::string speaker;
  std::string text;
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class DialogueKind { kSingleParty, kMultiParty };

const char* kind_name(DialogueKind kind);
DialogueKind parse_kind(const std::string& name);

struct Dialogue {
  std::string id;
  DialogueKind kind = DialogueKind::kMultiParty;
  std::vector<Utterance> utterances;
  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

// Throws ValidationError: empty dialogue, or speaker count inconsistent with kind.
void validate_dialogue(const Dialogue& d);

enum class OutputKind { kQuery, kResponse };

/// One (input, output) pair. A query-kind sample whose target is absent
/// teaches the NO_QUERY decision. `query` on a response sample records the
/// search that produced `knowledge`; it is never serialized as input.
struct TrainingSample {
  std::vector<Utterance> context;
  std::optional<std::string> query;
  std::optional<std::string> knowledge;
  OutputKind output_kind = OutputKind::kResponse;
  std::optional<std::string> target;
  std::string responder;
  std::string source;
  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

void validate_sample(const TrainingSample& s);

struct KnowledgeDialogueRecord {
  std::string id;
  std::vector<Utterance> context;
  std::string human_query;
  std::string retrieved_knowledge;
  std::string response;
  std::string responder;  // empty: inferred from the context
};

// Speaker who produces the next turn when none is given: the speaker before
// the last one (alternating exchange), else a placeholder.
std::string infer_responder(const std::vector<Utterance>& context);

nlohmann::json to_json(const Utterance& u);
nlohmann::json to_json(const Dialogue& d);
nlohmann::json to_json(const TrainingSample& s);
nlohmann::json to_json(const KnowledgeDialogueRecord& r);
std::vector<Utterance> utterances_from_json(const nlohmann::json& j);
Dialogue dialogue_from_json(const nlohmann::json& j);
TrainingSample sample_from_json(const nlohmann::json& j);
KnowledgeDialogueRecord knowledge_record_from_json(const nlohmann::json& j);

}  // namespace kdial::corpus
