#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kdial::tokenizer {

using TokenId = std::int32_t;

// Reserved ids occupy the bottom of every vocabulary.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kNoQuery = 4;  // "no search needed" query target
inline constexpr TokenId kSpecialCount = 5;
inline constexpr TokenId kFirstByteToken = kSpecialCount;
inline constexpr TokenId kBaseVocabularySize = kSpecialCount + 256;

const char* special_name(TokenId id);

struct Merge {
  TokenId left;
  TokenId right;
  TokenId result;
};

/// Byte-level BPE vocabulary: specials, the 256 single-byte tokens, then one
/// token per learned merge (in merge order).
class Vocabulary {
 public:
  // Specials and byte tokens only.
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  bool is_special(TokenId id) const { return id >= 0 && id < kSpecialCount; }
  const std::string& bytes(TokenId id) const;
  const std::vector<Merge>& merges() const { return merges_; }

  // Appends the merge (left, right) and returns the new token id.
  TokenId add_merge(TokenId left, TokenId right);

  std::vector<TokenId> encode(std::string_view text) const;
  // Drops specials; out-of-range ids raise RangeError naming the position.
  std::string decode(std::span<const TokenId> ids) const;

  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  // CRC-32 of the serialized form.
  std::uint32_t fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.merges_.size() == b.merges_.size() && a.serialize() == b.serialize();
  }

 private:
  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const;

  std::vector<std::string> tokens_;
  std::vector<Merge> merges_;
  // (left << 32 | right) -> merge rank
  std::unordered_map<std::uint64_t, std::uint32_t> merge_rank_;
};

inline std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) | static_cast<std::uint32_t>(right);
}

/// Splits text into the units merges never cross: runs of word bytes
/// (ASCII alphanumerics and all non-ASCII bytes) or of ASCII punctuation,
/// each taking at most one preceding whitespace byte; other whitespace
/// stands alone. Concatenating the chunks reproduces the input.
std::vector<std::string_view> pretokenize(std::string_view text);

struct BpeTrainResult {
  Vocabulary vocab;
  // True when the corpus ran out of pairs before reaching the target size.
  bool exhausted = false;
  // Pair frequency at the moment each merge was learned.
  std::vector<std::int64_t> merge_frequencies;
};

/// Learns merges until the vocabulary has `target_size` entries. Each step
/// merges the most frequent adjacent pair; ties go to the lexicographically
/// smallest (left bytes, right bytes).
BpeTrainResult train_bpe(std::span<const std::string> corpus, std::size_t target_size);
BpeTrainResult train_bpe(std::string_view corpus, std::size_t target_size);

inline std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text) { return vocab.encode(text); }
inline std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) { return vocab.decode(ids); }

}  // namespace kdial::tokenizer
