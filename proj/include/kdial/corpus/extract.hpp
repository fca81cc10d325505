#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/corpus/dialogue.hpp"

namespace kdial::corpus {

struct Comment {
  std::string id;
  std::optional<std::string> parent;  // absent for the root post
  std::string speaker;
  std::string text;
};

struct CommentThread {
  std::string id;
  std::vector<Comment> comments;
};

// Accepts {"root": {speaker, text, replies: [...]}} (ids optional) or a flat
// {"comments": [{id, parent, speaker, text}]} list.
CommentThread thread_from_json(const nlohmann::json& j, const std::string& fallback_id);

/// One dialogue per root-to-leaf reply path with at least two comments, in
/// depth-first order of the comment list. Throws ValidationError on a missing
/// or repeated root, unknown parent, duplicate id, or cyclic parent links.
std::vector<Dialogue> comments_to_dialogues(const CommentThread& thread);

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Whitespace-separated word count; the default when no vocabulary is at hand.
std::size_t count_words(std::string_view text);

/// Splits a one-author document into utterances: one per non-empty line,
/// re-split at sentence ends (greedily packed) when a line exceeds `cap`
/// tokens, and hard-split at the last fitting space when a single sentence
/// still does. Throws ValidationError for whitespace-only text.
Dialogue text_to_dialogue(std::string_view text, const std::string& id, std::size_t cap,
                          const TokenCounter& count_tokens = count_words, const std::string& speaker = "author");

// Sentence segmentation used by text_to_dialogue (ASCII and CJK terminators).
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace kdial::corpus
