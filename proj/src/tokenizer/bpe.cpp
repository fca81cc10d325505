#include "kdial/tokenizer/bpe.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <sstream>

#include "kdial/common/checksum.hpp"
#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"
#include "kdial/common/log.hpp"

namespace kdial::tokenizer {
namespace {

constexpr std::string_view kFormatHeader = "kdial-bpe-vocab v1";

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_punct(unsigned char c) { return c < 0x80 && !is_space(c) && !std::isalnum(c); }

enum class ByteClass { kSpace, kWord, kPunct };
ByteClass classify(unsigned char c) {
  if (is_space(c)) return ByteClass::kSpace;
  if (is_punct(c)) return ByteClass::kPunct;
  return ByteClass::kWord;
}

std::string escape_bytes(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (c > 0x20 && c < 0x7f && c != '\\') {
      out.push_back(static_cast<char>(c));
    } else {
      static const char* hex = "0123456789abcdef";
      out += "\\x";
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string unescape_bytes(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 4 > s.size()) throw FormatError("truncated escape in vocabulary");
      if (s[i + 1] != 'x') throw FormatError("bad escape in vocabulary");
      unsigned value = 0;
      auto [p, ec] = std::from_chars(s.data() + i + 2, s.data() + i + 4, value, 16);
      if (ec != std::errc() || p != s.data() + i + 4) throw FormatError("bad hex escape in vocabulary");
      out.push_back(static_cast<char>(value));
      i += 3;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

const char* special_name(TokenId id) {
  switch (id) {
    case kPad: return "<pad>";
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    case kSep: return "<sep>";
    case kNoQuery: return "<no_query>";
    default: return nullptr;
  }
}

Vocabulary::Vocabulary() {
  tokens_.reserve(kBaseVocabularySize);
  for (TokenId id = 0; id < kSpecialCount; ++id) tokens_.emplace_back();
  for (int b = 0; b < 256; ++b) tokens_.emplace_back(1, static_cast<char>(b));
}

const std::string& Vocabulary::bytes(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw RangeError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::add_merge(TokenId left, TokenId right) {
  if (is_special(left) || is_special(right)) throw ValidationError("special tokens cannot take part in merges");
  const std::string joined = bytes(left) + bytes(right);
  const auto key = pair_key(left, right);
  if (merge_rank_.count(key)) throw ValidationError("duplicate merge rule");
  const auto result = static_cast<TokenId>(tokens_.size());
  merge_rank_[key] = static_cast<std::uint32_t>(merges_.size());
  merges_.push_back({left, right, result});
  tokens_.push_back(joined);
  return result;
}

void Vocabulary::encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
  std::vector<TokenId> symbols;
  symbols.reserve(chunk.size());
  for (unsigned char c : chunk) symbols.push_back(kFirstByteToken + c);
  while (symbols.size() > 1) {
    std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<std::uint32_t>::max()) break;
    const Merge& m = merges_[best_rank];
    std::size_t w = 0;
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == m.left && symbols[i + 1] == m.right) {
        symbols[w++] = m.result;
        i += 2;
      } else {
        symbols[w++] = symbols[i++];
      }
    }
    symbols.resize(w);
  }
  out.insert(out.end(), symbols.begin(), symbols.end());
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (auto chunk : pretokenize(text)) encode_chunk(chunk, out);
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw RangeError("token id " + std::to_string(id) + " at position " + std::to_string(i) +
                       " outside vocabulary of " + std::to_string(tokens_.size()));
    }
    if (is_special(id)) continue;
    out += tokens_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::ostringstream os;
  os << kFormatHeader << '\n';
  os << "tokens " << tokens_.size() << '\n';
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    const auto tid = static_cast<TokenId>(id);
    if (is_special(tid)) {
      os << id << "\tspecial\t" << special_name(tid) << '\n';
    } else if (tid < kBaseVocabularySize) {
      os << id << "\tbyte\t" << escape_bytes(tokens_[id]) << '\n';
    } else {
      os << id << "\tmerge\t" << escape_bytes(tokens_[id]) << '\n';
    }
  }
  os << "merges " << merges_.size() << '\n';
  for (const auto& m : merges_) os << m.left << ' ' << m.right << '\n';
  return os.str();
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != kFormatHeader) throw FormatError("not a kdial vocabulary (bad header)");
  std::string word;
  std::size_t n_tokens = 0;
  if (!std::getline(is, line)) throw FormatError("vocabulary: missing token count");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> n_tokens) || word != "tokens") throw FormatError("vocabulary: bad token count line");
  }
  std::vector<std::string> listed(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (!std::getline(is, line)) throw FormatError("vocabulary: truncated token table");
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) throw FormatError("vocabulary: bad token line " + line);
    if (std::stoul(line.substr(0, t1)) != i) throw FormatError("vocabulary: token ids must be dense and ordered");
    const auto kind = line.substr(t1 + 1, t2 - t1 - 1);
    listed[i] = kind == "special" ? std::string() : unescape_bytes(std::string_view(line).substr(t2 + 1));
  }
  std::size_t n_merges = 0;
  if (!std::getline(is, line)) throw FormatError("vocabulary: missing merge count");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> n_merges) || word != "merges") throw FormatError("vocabulary: bad merge count line");
  }
  Vocabulary vocab;
  for (std::size_t i = 0; i < n_merges; ++i) {
    if (!std::getline(is, line)) throw FormatError("vocabulary: truncated merge list");
    std::istringstream ls(line);
    TokenId left = 0, right = 0;
    if (!(ls >> left >> right)) throw FormatError("vocabulary: bad merge line " + line);
    if (left < 0 || right < 0 || static_cast<std::size_t>(left) >= vocab.size() ||
        static_cast<std::size_t>(right) >= vocab.size()) {
      throw FormatError("vocabulary: merge refers to an undefined token");
    }
    vocab.add_merge(left, right);
  }
  if (vocab.size() != n_tokens) throw FormatError("vocabulary: token count does not match merges");
  for (std::size_t i = kSpecialCount; i < n_tokens; ++i) {
    if (vocab.tokens_[i] != listed[i]) throw FormatError("vocabulary: token " + std::to_string(i) + " disagrees with merges");
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const { write_text_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::string& path) { return parse(read_text_file(path)); }

std::uint32_t Vocabulary::fingerprint() const { return crc32(serialize()); }

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t start = i;
    if (classify(c) == ByteClass::kSpace) {
      std::size_t j = i;
      while (j < n && classify(static_cast<unsigned char>(text[j])) == ByteClass::kSpace) ++j;
      if (j == n) {
        chunks.push_back(text.substr(i, j - i));
        break;
      }
      // The last whitespace byte attaches to the following run.
      if (j - i > 1) chunks.push_back(text.substr(i, j - 1 - i));
      start = j - 1;
      i = j;
    }
    const ByteClass cls = classify(static_cast<unsigned char>(text[i]));
    std::size_t j = i;
    while (j < n && classify(static_cast<unsigned char>(text[j])) == cls) ++j;
    chunks.push_back(text.substr(start, j - start));
    i = j;
  }
  return chunks;
}

namespace {

struct Word {
  std::vector<TokenId> symbols;
  std::int64_t count = 0;
};

// Lexicographic order on the byte strings of (left, right).
bool pair_less(const Vocabulary& vocab, std::uint64_t a, std::uint64_t b) {
  const auto al = static_cast<TokenId>(a >> 32), ar = static_cast<TokenId>(a & 0xffffffffu);
  const auto bl = static_cast<TokenId>(b >> 32), br = static_cast<TokenId>(b & 0xffffffffu);
  const int c = vocab.bytes(al).compare(vocab.bytes(bl));
  if (c != 0) return c < 0;
  return vocab.bytes(ar) < vocab.bytes(br);
}

}  // namespace

BpeTrainResult train_bpe(std::span<const std::string> corpus, std::size_t target_size) {
  if (corpus.empty()) throw ValidationError("train_bpe: empty corpus");
  if (target_size <= static_cast<std::size_t>(kBaseVocabularySize)) {
    throw ValidationError("train_bpe: target size " + std::to_string(target_size) + " must exceed the " +
                          std::to_string(kBaseVocabularySize) + " base tokens");
  }

  std::map<std::string_view, std::int64_t> chunk_counts;
  for (const auto& line : corpus) {
    for (auto chunk : pretokenize(line)) ++chunk_counts[chunk];
  }
  if (chunk_counts.empty()) throw ValidationError("train_bpe: empty corpus");

  std::vector<Word> words;
  words.reserve(chunk_counts.size());
  for (const auto& [chunk, count] : chunk_counts) {
    Word w;
    for (unsigned char c : chunk) w.symbols.push_back(kFirstByteToken + c);
    w.count = count;
    words.push_back(std::move(w));
  }

  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) {
    const auto& s = words[wi].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const auto key = pair_key(s[i], s[i + 1]);
      pair_counts[key] += words[wi].count;
      pair_words[key].push_back(wi);
    }
  }

  BpeTrainResult result;
  Vocabulary& vocab = result.vocab;
  while (vocab.size() < target_size) {
    std::uint64_t best = 0;
    std::int64_t best_count = 0;
    for (const auto& [key, count] : pair_counts) {
      if (count <= 0) continue;
      if (count > best_count || (count == best_count && pair_less(vocab, key, best))) {
        best = key;
        best_count = count;
      }
    }
    if (best_count == 0) {
      result.exhausted = true;
      log::warning("train_bpe: corpus exhausted mergeable pairs at vocabulary size " + std::to_string(vocab.size()) +
                   " (requested " + std::to_string(target_size) + ")");
      break;
    }
    const auto left = static_cast<TokenId>(best >> 32);
    const auto right = static_cast<TokenId>(best & 0xffffffffu);
    const TokenId merged = vocab.add_merge(left, right);
    result.merge_frequencies.push_back(best_count);

    auto affected = std::move(pair_words[best]);
    pair_words.erase(best);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::uint32_t wi : affected) {
      Word& w = words[wi];
      auto& s = w.symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] == left && s[i + 1] == right) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const auto key = pair_key(s[i], s[i + 1]);
        if ((pair_counts[key] -= w.count) == 0) pair_counts.erase(key);
      }
      std::size_t out = 0;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          s[out++] = merged;
          i += 2;
        } else {
          s[out++] = s[i++];
        }
      }
      s.resize(out);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const auto key = pair_key(s[i], s[i + 1]);
        pair_counts[key] += w.count;
        if (s[i] == merged || s[i + 1] == merged) pair_words[key].push_back(wi);
      }
    }
    pair_counts.erase(best);
  }
  return result;
}

BpeTrainResult train_bpe(std::string_view corpus, std::size_t target_size) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= corpus.size()) {
    const auto end = corpus.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < corpus.size()) lines.emplace_back(corpus.substr(start));
      break;
    }
    lines.emplace_back(corpus.substr(start, end - start + 1));
    start = end + 1;
  }
  return train_bpe(lines, target_size);
}

}  // namespace kdial::tokenizer
