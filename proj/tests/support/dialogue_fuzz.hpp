#pragma once

#include <random>
#include <string>
#include <vector>

#include "kdial/corpus/dialogue.hpp"

namespace kdial::testing {

// Random words over a small mixed-script alphabet.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  static const char* kWords[] = {"the",  "river", "cold", "tea",  "42",    "mountain", "书",   "天气", "привет",
                                 "ok!",  "why?",  "jazz", "\xF0\x9F\x98\x80", "a",     "bb",       "ccc",  "route", "x-y"};
  const std::size_t n = 1 + rng() % max_words;
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[rng() % (sizeof(kWords) / sizeof(kWords[0]))];
  }
  return out;
}

inline std::vector<corpus::Utterance> random_context(std::mt19937_64& rng, std::size_t max_turns,
                                                     std::size_t speakers, std::size_t max_words) {
  std::vector<corpus::Utterance> ctx;
  const std::size_t n = 1 + rng() % max_turns;
  for (std::size_t i = 0; i < n; ++i) {
    ctx.push_back({"s" + std::to_string(rng() % speakers), random_text(rng, max_words)});
  }
  return ctx;
}

inline corpus::Dialogue random_dialogue(std::mt19937_64& rng, std::size_t index, std::size_t max_turns = 12,
                                        std::size_t max_words = 20) {
  corpus::Dialogue d;
  d.id = "fuzz" + std::to_string(index);
  const bool single = rng() % 3 == 0;
  d.kind = single ? corpus::DialogueKind::kSingleParty : corpus::DialogueKind::kMultiParty;
  const std::size_t speakers = single ? 1 : 2 + rng() % 10;
  const std::size_t n = 2 + rng() % max_turns;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string speaker = single ? "author" : "p" + std::to_string(i < 2 ? i : rng() % speakers);
    d.utterances.push_back({speaker, random_text(rng, max_words)});
  }
  return d;
}

inline corpus::KnowledgeDialogueRecord random_record(std::mt19937_64& rng, std::size_t index,
                                                     std::size_t max_words = 40) {
  corpus::KnowledgeDialogueRecord r;
  r.id = "rec" + std::to_string(index);
  r.context = random_context(rng, 8, 3, 15);
  if (rng() % 2) {
    r.human_query = random_text(rng, 4);
    r.retrieved_knowledge = random_text(rng, max_words);
  }
  r.response = random_text(rng, 20);
  return r;
}

}  // namespace kdial::testing
