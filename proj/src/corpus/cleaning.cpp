#include "kdial/corpus/cleaning.hpp"

namespace kdial::corpus {

std::string strip_control_characters(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (c == '\t') {
      out.push_back(' ');
    } else if (c == '\n' || (c >= 0x20 && c != 0x7f)) {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::optional<Dialogue> clean_dialogue(Dialogue d, const CleaningOptions& options, std::size_t min_utterances) {
  std::vector<Utterance> kept;
  for (auto& u : d.utterances) {
    u.text = normalize_whitespace(strip_control_characters(u.text));
    if (u.text.size() < options.min_utterance_bytes || u.text.size() > options.max_utterance_bytes) continue;
    kept.push_back(std::move(u));
  }
  if (kept.size() < min_utterances || kept.empty()) return std::nullopt;
  d.utterances = std::move(kept);
  std::unordered_set<std::string> speakers;
  for (const auto& u : d.utterances) speakers.insert(u.speaker);
  d.kind = speakers.size() >= 2 ? DialogueKind::kMultiParty : DialogueKind::kSingleParty;
  return d;
}

bool Deduplicator::insert(const Dialogue& d) {
  std::string key;
  for (const auto& u : d.utterances) {
    key += normalize_whitespace(u.speaker);
    key += '\x1f';
    key += normalize_whitespace(u.text);
    key += '\x1e';
  }
  return seen_.insert(std::move(key)).second;
}

}  // namespace kdial::corpus
