#include "kdial/corpus/extract.hpp"

#include <map>
#include <set>

#include "kdial/common/error.hpp"

namespace kdial::corpus {

using nlohmann::json;

namespace {

void flatten(const json& node, const std::optional<std::string>& parent, const std::string& auto_id,
             std::vector<Comment>& out) {
  Comment c;
  c.id = node.contains("id") ? node.at("id").get<std::string>() : auto_id;
  c.parent = parent;
  c.speaker = node.contains("speaker") ? node.at("speaker").get<std::string>() : node.value("author", "");
  c.text = node.at("text").get<std::string>();
  out.push_back(c);
  if (node.contains("replies")) {
    std::size_t i = 0;
    for (const auto& reply : node.at("replies")) flatten(reply, c.id, auto_id + "." + std::to_string(i++), out);
  }
}

}  // namespace

CommentThread thread_from_json(const json& j, const std::string& fallback_id) {
  try {
    CommentThread t;
    t.id = j.value("id", fallback_id);
    if (j.contains("root")) {
      flatten(j.at("root"), std::nullopt, "0", t.comments);
    } else {
      for (const auto& c : j.at("comments")) {
        Comment cm;
        cm.id = c.at("id").get<std::string>();
        if (c.contains("parent") && !c.at("parent").is_null()) cm.parent = c.at("parent").get<std::string>();
        cm.speaker = c.contains("speaker") ? c.at("speaker").get<std::string>() : c.value("author", "");
        cm.text = c.at("text").get<std::string>();
        t.comments.push_back(std::move(cm));
      }
    }
    return t;
  } catch (const json::exception& e) {
    throw ValidationError("malformed thread '" + fallback_id + "': " + e.what());
  }
}

std::vector<Dialogue> comments_to_dialogues(const CommentThread& thread) {
  const auto& cs = thread.comments;
  const std::string where = "thread '" + thread.id + "': ";
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!index.emplace(cs[i].id, i).second) throw ValidationError(where + "duplicate comment id '" + cs[i].id + "'");
  }
  std::optional<std::size_t> root;
  std::vector<std::vector<std::size_t>> children(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!cs[i].parent) {
      if (root) throw ValidationError(where + "more than one root ('" + cs[*root].id + "', '" + cs[i].id + "')");
      root = i;
      continue;
    }
    const auto it = index.find(*cs[i].parent);
    if (it == index.end()) {
      throw ValidationError(where + "comment '" + cs[i].id + "' replies to unknown '" + *cs[i].parent + "'");
    }
    children[it->second].push_back(i);
  }
  if (cs.empty()) return {};
  if (!root) throw ValidationError(where + "no root post (every comment has a parent, so the links are cyclic)");

  // Everything must hang off the root; leftovers can only sit on a cycle.
  std::vector<char> reached(cs.size(), 0);
  std::vector<std::size_t> stack = {*root};
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    reached[i] = 1;
    for (auto c : children[i]) stack.push_back(c);
  }
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!reached[i]) throw ValidationError(where + "cyclic parent links through comment '" + cs[i].id + "'");
  }

  std::vector<Dialogue> out;
  std::vector<std::size_t> path;
  auto walk = [&](auto& self, std::size_t i) -> void {
    path.push_back(i);
    if (children[i].empty()) {
      if (path.size() >= 2) {
        Dialogue d;
        d.id = thread.id + "/" + cs[i].id;
        std::set<std::string> speakers;
        for (auto p : path) {
          d.utterances.push_back({cs[p].speaker, cs[p].text});
          speakers.insert(cs[p].speaker);
        }
        d.kind = speakers.size() >= 2 ? DialogueKind::kMultiParty : DialogueKind::kSingleParty;
        out.push_back(std::move(d));
      }
    } else {
      for (auto c : children[i]) self(self, c);
    }
    path.pop_back();
  };
  walk(walk, *root);
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Longest prefix within `cap` tokens, preferring to cut at a space.
std::vector<std::string> hard_split(const std::string& text, std::size_t cap, const TokenCounter& count) {
  std::vector<std::string> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    if (count(rest) <= cap) {
      out.emplace_back(rest);
      break;
    }
    std::size_t lo = 1, hi = rest.size();  // largest byte length that fits
    std::size_t best = 0;
    while (lo <= hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      while (mid < rest.size() && utf8_continuation(static_cast<unsigned char>(rest[mid]))) ++mid;
      if (count(rest.substr(0, mid)) <= cap) {
        best = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    if (best == 0) {  // even one character is over the cap; emit it alone
      best = 1;
      while (best < rest.size() && utf8_continuation(static_cast<unsigned char>(rest[best]))) ++best;
    }
    const auto space = rest.substr(0, best).find_last_of(' ');
    if (space != std::string_view::npos && space > 0 && best < rest.size()) best = space;
    auto piece = trim(rest.substr(0, best));
    if (!piece.empty()) out.push_back(std::move(piece));
    rest = rest.substr(best);
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  }
  return out;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  static const std::string_view kCjkEnds[] = {"\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"};  // 。！？
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?' || text[j] == '"')) ++j;
      if (j == text.size() || text[j] == ' ' || text[j] == '\n') {
        emit(j);
        i = j;
        continue;
      }
      i = j;
      continue;
    }
    bool cjk = false;
    for (auto e : kCjkEnds) {
      if (text.substr(i, e.size()) == e) {
        emit(i + e.size());
        i += e.size();
        cjk = true;
        break;
      }
    }
    if (!cjk) ++i;
  }
  emit(text.size());
  return out;
}

Dialogue text_to_dialogue(std::string_view text, const std::string& id, std::size_t cap,
                          const TokenCounter& count_tokens, const std::string& speaker) {
  if (cap == 0) throw ValidationError("utterance cap must be positive");
  Dialogue d;
  d.id = id;
  d.kind = DialogueKind::kSingleParty;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty()) continue;
    if (count_tokens(line) <= cap) {
      d.utterances.push_back({speaker, line});
      continue;
    }
    std::string current;
    auto flush = [&] {
      if (!current.empty()) d.utterances.push_back({speaker, std::move(current)});
      current.clear();
    };
    for (const auto& sentence : split_sentences(line)) {
      std::vector<std::string> pieces = count_tokens(sentence) <= cap ? std::vector<std::string>{sentence}
                                                                      : hard_split(sentence, cap, count_tokens);
      for (auto& piece : pieces) {
        const auto joined = current.empty() ? piece : current + " " + piece;
        if (count_tokens(joined) <= cap) {
          current = joined;
        } else {
          flush();
          current = std::move(piece);
        }
      }
    }
    flush();
  }
  if (d.utterances.empty()) throw ValidationError("document '" + id + "' is empty or whitespace-only");
  return d;
}

}  // namespace kdial::corpus
