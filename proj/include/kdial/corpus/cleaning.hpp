#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

#include "kdial/corpus/dialogue.hpp"

namespace kdial::corpus {

// Removes C0 controls (tab becomes a space, newline kept) and DEL.
std::string strip_control_characters(std::string_view text);
// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

struct CleaningOptions {
  std::size_t min_utterance_bytes = 1;
  std::size_t max_utterance_bytes = 4000;
};

// Cleans every utterance and drops those outside the byte bounds. Returns
// nullopt when fewer than `min_utterances` survive.
std::optional<Dialogue> clean_dialogue(Dialogue d, const CleaningOptions& options, std::size_t min_utterances = 1);

/// Remembers normalized dialogue contents; insert() is false for repeats.
class Deduplicator {
 public:
  bool insert(const Dialogue& d);
  std::size_t size() const { return seen_.size(); }

 private:
  std::unordered_set<std::string> seen_;
};

}  // namespace kdial::corpus
