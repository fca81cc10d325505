#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

#include "bm25_oracle.hpp"
#include "kdial/common/binary_io.hpp"
#include "kdial/common/error.hpp"
#include "kdial/knowledge/index.hpp"

using namespace kdial;
using namespace kdial::knowledge;

namespace {

const tokenizer::Vocabulary& test_vocab() {
  static const tokenizer::Vocabulary vocab =
      tokenizer::train_bpe("the river flows north. the mountain is tall. rivers and mountains and lakes.\n"
                           "coffee tea water juice. north south east west. the the the and and.",
                           330)
          .vocab;
  return vocab;
}

Analyzer analyzer() { return Analyzer(test_vocab()); }

std::vector<Document> five_docs() {
  return {{"d1", "River", "The river flows north past the old mill.", std::nullopt},
          {"d2", "Mountain", "The mountain is tall and the river is cold.", std::nullopt},
          {"d3", "Coffee", "Coffee and tea are warm drinks.", std::nullopt},
          {"d4", "Lakes", "Lakes and rivers and more rivers in the north.", std::nullopt},
          {"d5", "Zebra", "Zebras graze far from any water.", std::nullopt}};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("kdial_knowledge_test_" + name)).string();
}

}  // namespace

TEST(Index, EmptyCorpus) {
  const auto index = Index::build({}, analyzer());
  EXPECT_EQ(index.size(), 0u);
  EXPECT_TRUE(index.search("river", 3).empty());
}

TEST(Index, SingleDocumentHasOnePostingPerTerm) {
  const auto index = Index::build({{"only", "", "alpha beta gamma beta", std::nullopt}}, analyzer());
  for (const auto& [term, list] : index.postings()) {
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].doc, 0u);
  }
  EXPECT_EQ(index.doc_lengths()[0], analyzer().terms("alpha beta gamma beta").size());
}

TEST(Index, PostingsMatchBruteForceRecount) {
  const auto docs = five_docs();
  const auto index = Index::build(docs, analyzer());
  std::map<tokenizer::TokenId, std::map<std::uint32_t, std::uint32_t>> recount;
  for (std::uint32_t i = 0; i < docs.size(); ++i) {
    for (auto t : analyzer().terms(docs[i].title)) ++recount[t][i];
    for (auto t : analyzer().terms(docs[i].body)) ++recount[t][i];
  }
  ASSERT_EQ(recount.size(), index.postings().size());
  for (const auto& [term, per_doc] : recount) {
    const auto& list = index.postings().at(term);
    ASSERT_EQ(list.size(), per_doc.size());
    std::size_t k = 0;
    for (const auto& [doc, tf] : per_doc) {
      EXPECT_EQ(list[k].doc, doc);
      EXPECT_EQ(list[k].tf, tf);
      ++k;
    }
  }
  index.verify();
}

TEST(Index, RejectsDuplicatesAndEmptyBodies) {
  auto docs = five_docs();
  docs.push_back({"d1", "", "again", std::nullopt});
  EXPECT_THROW(Index::build(docs, analyzer()), ValidationError);
  EXPECT_THROW(Index::build({{"x", "t", "  ", std::nullopt}}, analyzer()), ValidationError);
  EXPECT_THROW(Index::build(five_docs(), analyzer()).search("river", 0), ValidationError);
}

TEST(Search, UniqueTermRanksItsDocumentFirst) {
  const auto index = Index::build(five_docs(), analyzer());
  const auto hits = index.search("zebras", 3);
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].doc_id, "d5");
  EXPECT_TRUE(index.search("!!! ???", 3).empty());
  EXPECT_TRUE(index.search("", 3).empty());
}

TEST(Search, TwoTermQueryMatchesExhaustiveScoring) {
  const auto docs = five_docs();
  const auto index = Index::build(docs, analyzer());
  for (const char* q : {"river north", "the mountain", "rivers lakes", "Coffee WATER"}) {
    const auto oracle = kdial::testing::exhaustive_bm25(docs, analyzer(), q);
    const auto hits = index.search(q, 10);
    ASSERT_EQ(hits.size(), oracle.size()) << q;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].doc_id, oracle[i].id) << q;
      EXPECT_NEAR(hits[i].score, oracle[i].score, 1e-12);
    }
  }
}

TEST(Search, ResultsSortedWithIdTieBreak) {
  std::vector<Document> docs;
  for (const char* id : {"c", "a", "b"}) docs.push_back({id, "", "same words here", std::nullopt});
  docs.push_back({"z", "", "kkk jjj", std::nullopt});
  const auto hits = Index::build(docs, analyzer()).search("same words", 5);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].doc_id, "a");
  EXPECT_EQ(hits[1].doc_id, "b");
  EXPECT_EQ(hits[2].doc_id, "c");
  for (const auto& h : hits) {
    EXPECT_TRUE(std::isfinite(h.score));
    EXPECT_GE(h.score, 0.0);
  }
}

TEST(Search, FrozenStatisticsKeepScoresBitIdentical) {
  auto index = Index::build(five_docs(), analyzer());
  index.freeze_statistics();
  const auto before = index.search("river north", 5);
  index.add_document({"d6", "Coffee", "Espresso coffee beans.", std::nullopt});
  const auto after = index.search("river north", 5);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].doc_id, after[i].doc_id);
    EXPECT_EQ(before[i].score, after[i].score);
  }
  index.unfreeze_statistics();
  EXPECT_NE(index.search("river north", 5)[0].score, before[0].score);
}

TEST(Snippet, PicksDensestWindowAndEarliestTie) {
  std::string body;
  for (int i = 0; i < 40; ++i) body += " filler";
  body += " coffee beans coffee";
  for (int i = 0; i < 40; ++i) body += " filler";
  const auto index = Index::build({{"d", "", body, std::nullopt}, {"e", "", "unrelated", std::nullopt}}, analyzer());
  const auto hits = index.search("coffee", 1, {12});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_NE(hits[0].snippet.find("coffee beans coffee"), std::string::npos) << hits[0].snippet;
  EXPECT_LE(analyzer().spans(hits[0].snippet).size(), 12u);

  const auto tie = Index::build({{"t", "", "tea one two three tea four five six", std::nullopt}}, analyzer());
  EXPECT_EQ(tie.search("tea", 1, {3})[0].snippet.substr(0, 3), "tea");
  const auto whole = Index::build({{"w", "", "short tea", std::nullopt}}, analyzer());
  EXPECT_EQ(whole.search("tea", 1)[0].snippet, "short tea");
}

TEST(IndexFile, RoundTripAndRejections) {
  auto index = Index::build(five_docs(), analyzer());
  index.freeze_statistics();
  const auto path = temp_path("index.bin");
  index.save(path);
  const auto loaded = Index::load(path, analyzer());
  EXPECT_EQ(loaded.documents(), index.documents());
  EXPECT_EQ(loaded.postings(), index.postings());
  EXPECT_EQ(loaded.doc_lengths(), index.doc_lengths());
  EXPECT_TRUE(loaded.statistics_frozen());
  const auto a = index.search("river mountain", 5), b = loaded.search("river mountain", 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].score, b[i].score);

  EXPECT_THROW(Index::load(path, Analyzer(tokenizer::Vocabulary())), ValidationError);
  auto bytes = read_file_bytes(path);
  bytes[20] ^= 0x40;
  write_file_bytes(path, bytes);
  EXPECT_THROW(Index::load(path, analyzer()), FormatError);
  std::filesystem::remove(path);
}

TEST(IndexFile, DocumentsFromJson) {
  const auto d = document_from_json(nlohmann::json::parse(R"({"id":7,"title":"T","body":"B","timestamp":"2021"})"));
  EXPECT_EQ(d.id, "7");
  EXPECT_EQ(*d.timestamp, "2021");
  EXPECT_EQ(document_from_json(to_json(d)), d);
  EXPECT_THROW(document_from_json(nlohmann::json::parse(R"({"id":"x"})")), ValidationError);
}
