#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kdial/corpus/dialogue.hpp"

namespace kdial::corpus {

/// One invented topic with a single fact document.
struct FactTopic {
  std::string id;
  std::string title;  // unique; the exact query that retrieves the document
  std::string fact;   // span that a grounded response must contain
  std::string body;
};

struct ProbeContext {
  std::size_t topic = 0;  // index into topics
  std::vector<Utterance> context;
  std::string responder;
};

/// A closed world for exercising query -> retrieve -> respond. Knowledge
/// records teach title queries and fact-bearing responses; chit-chat records
/// teach NO_QUERY. Probes ask about every topic with a phrasing held out of
/// training.
struct SyntheticWorld {
  std::vector<FactTopic> topics;
  std::vector<KnowledgeDialogueRecord> records;
  std::vector<ProbeContext> probes;
  std::vector<std::string> chitchat_topics;

  // Each record's context plus response as a plain dialogue.
  std::vector<Dialogue> dialogues() const;
  // All text, for tokenizer training.
  std::string text() const;
};

SyntheticWorld make_synthetic_world(std::size_t topics, std::uint64_t seed);

}  // namespace kdial::corpus
