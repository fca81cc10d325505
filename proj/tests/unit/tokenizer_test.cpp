#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "../support/bpe_oracle.hpp"
#include "../support/text_corpus.hpp"
#include "kdial/common/error.hpp"
#include "kdial/tokenizer/bpe.hpp"

using namespace kdial::tokenizer;

namespace {

std::vector<std::pair<std::string, std::string>> merges_as_bytes(const Vocabulary& v) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& m : v.merges()) out.emplace_back(v.bytes(m.left), v.bytes(m.right));
  return out;
}

}  // namespace

TEST(Pretokenize, ConcatenationIsLossless) {
  for (const auto& line : kdial::testing::mixed_script_lines(20000, 5)) {
    std::string joined;
    for (auto c : pretokenize(line)) {
      EXPECT_FALSE(c.empty());
      joined += c;
    }
    EXPECT_EQ(joined, line);
  }
}

TEST(Pretokenize, AttachesOneLeadingSpace) {
  auto chunks = pretokenize("hi,  there!");
  std::vector<std::string> s(chunks.begin(), chunks.end());
  EXPECT_EQ(s, (std::vector<std::string>{"hi", ",", " ", " there", "!"}));
}

TEST(TrainBpe, FirstMergeOfRepeatedPair) {
  std::vector<std::string> corpus{"ab ab ab"};
  const auto oracle = kdial::testing::brute_force_bpe(corpus, 1);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(oracle[0], (std::pair<std::string, std::string>{"a", "b"}));
  auto result = train_bpe(corpus, kBaseVocabularySize + 1);
  EXPECT_EQ(merges_as_bytes(result.vocab)[0], oracle[0]);
  EXPECT_FALSE(result.exhausted);
}

TEST(TrainBpe, SingleCharacterCorpusLearnsNothing) {
  std::vector<std::string> corpus{"a"};
  auto result = train_bpe(corpus, 300);
  EXPECT_TRUE(result.exhausted);
  EXPECT_TRUE(result.vocab.merges().empty());
  EXPECT_EQ(result.vocab.size(), static_cast<std::size_t>(kBaseVocabularySize));
}

TEST(TrainBpe, TiesGoToLexicographicallySmallestPair) {
  std::vector<std::string> corpus{"cd ab"};
  const auto oracle = kdial::testing::brute_force_bpe(corpus, 3);
  EXPECT_EQ(oracle[0], (std::pair<std::string, std::string>{" ", "a"}));
  auto result = train_bpe(corpus, kBaseVocabularySize + 3);
  EXPECT_EQ(merges_as_bytes(result.vocab), oracle);
}

TEST(TrainBpe, MatchesBruteForceOnMixedText) {
  const auto corpus = kdial::testing::mixed_script_lines(3000, 17);
  const auto oracle = kdial::testing::brute_force_bpe(corpus, 150);
  auto result = train_bpe(corpus, kBaseVocabularySize + 150);
  EXPECT_EQ(merges_as_bytes(result.vocab), oracle);
}

TEST(TrainBpe, MergeFrequenciesNeverIncrease) {
  auto result = train_bpe(kdial::testing::mixed_script_lines(20000, 2), 700);
  for (std::size_t i = 1; i < result.merge_frequencies.size(); ++i) {
    EXPECT_LE(result.merge_frequencies[i], result.merge_frequencies[i - 1]) << "merge " << i;
  }
}

TEST(TrainBpe, IsDeterministic) {
  const auto corpus = kdial::testing::mixed_script_lines(10000, 8);
  EXPECT_EQ(train_bpe(corpus, 600).vocab.serialize(), train_bpe(corpus, 600).vocab.serialize());
}

TEST(TrainBpe, RejectsBadArguments) {
  std::vector<std::string> empty;
  EXPECT_THROW(train_bpe(empty, 400), kdial::ValidationError);
  std::vector<std::string> corpus{"abc"};
  EXPECT_THROW(train_bpe(corpus, kBaseVocabularySize), kdial::ValidationError);
}

TEST(Encode, EmptyTextGivesNoTokens) {
  Vocabulary v;
  EXPECT_TRUE(v.encode("").empty());
}

TEST(Encode, HandAppliedMerge) {
  Vocabulary v;
  const TokenId ab = v.add_merge(kFirstByteToken + 'a', kFirstByteToken + 'b');
  EXPECT_EQ(v.encode("abab"), (std::vector<TokenId>{ab, ab}));
}

TEST(Encode, MergesApplyInRuleOrder) {
  // Rules: (b,c) first, then (a,b). "abc" -> a + bc, never ab + c.
  Vocabulary v;
  const TokenId bc = v.add_merge(kFirstByteToken + 'b', kFirstByteToken + 'c');
  v.add_merge(kFirstByteToken + 'a', kFirstByteToken + 'b');
  EXPECT_EQ(v.encode("abc"), (std::vector<TokenId>{kFirstByteToken + 'a', bc}));
}

TEST(Encode, RoundTripAndNoSpecials) {
  const auto corpus = kdial::testing::mixed_script_lines(30000, 21);
  auto vocab = train_bpe(corpus, 900).vocab;
  for (const auto& line : kdial::testing::mixed_script_lines(30000, 22)) {
    const auto ids = vocab.encode(line);
    for (auto id : ids) EXPECT_FALSE(vocab.is_special(id));
    ASSERT_EQ(vocab.decode(ids), line);
  }
  const std::string raw("\x00\xff\xfe<eos>\x80", 9);
  EXPECT_EQ(vocab.decode(vocab.encode(raw)), raw);
}

TEST(Decode, EmptyAndSpecials) {
  Vocabulary v;
  EXPECT_EQ(v.decode(std::vector<TokenId>{}), "");
  auto ids = v.encode("hi");
  ids.push_back(kEos);
  ids.insert(ids.begin(), kBos);
  EXPECT_EQ(v.decode(ids), "hi");
}

TEST(Decode, OutOfRangeNamesPosition) {
  Vocabulary v;
  std::vector<TokenId> ids{kFirstByteToken + 'a', 99999};
  try {
    v.decode(ids);
    FAIL();
  } catch (const kdial::RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos) << e.what();
  }
}

TEST(VocabularyFile, SaveLoadRoundTrip) {
  auto vocab = train_bpe(kdial::testing::mixed_script_lines(8000, 4), 500).vocab;
  const auto path = (std::filesystem::temp_directory_path() / "kdial_vocab_test.txt").string();
  vocab.save(path);
  auto loaded = Vocabulary::load(path);
  EXPECT_EQ(loaded.serialize(), vocab.serialize());
  EXPECT_EQ(loaded.fingerprint(), vocab.fingerprint());
  std::remove(path.c_str());
}

TEST(VocabularyFile, RejectsTamperedTokens) {
  Vocabulary v;
  v.add_merge(kFirstByteToken + 'a', kFirstByteToken + 'b');
  auto text = v.serialize();
  const auto pos = text.find("\tmerge\tab");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "\tmerge\tzz");
  EXPECT_THROW(Vocabulary::parse(text), kdial::FormatError);
  EXPECT_THROW(Vocabulary::parse("garbage"), kdial::FormatError);
}

TEST(Vocabulary, SpecialsAreReservedAndUnmergeable) {
  Vocabulary v;
  EXPECT_TRUE(v.is_special(kNoQuery));
  EXPECT_FALSE(v.is_special(kFirstByteToken));
  EXPECT_THROW(v.add_merge(kEos, kFirstByteToken), kdial::ValidationError);
}
