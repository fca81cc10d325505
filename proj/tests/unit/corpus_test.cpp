#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "dialogue_fuzz.hpp"
#include "kdial/common/error.hpp"
#include "kdial/common/log.hpp"
#include "kdial/corpus/cleaning.hpp"
#include "kdial/corpus/extract.hpp"
#include "kdial/corpus/mixer.hpp"
#include "kdial/corpus/pipeline.hpp"
#include "kdial/corpus/samples.hpp"

using namespace kdial;
using namespace kdial::corpus;
using model::Segment;

namespace {

Comment comment(std::string id, std::optional<std::string> parent, std::string speaker = "u") {
  return {id, std::move(parent), std::move(speaker), "text of " + id};
}

model::ModelConfig byte_config(std::size_t max_len = 256) {
  model::ModelConfig c;
  c.vocab_size = tokenizer::kBaseVocabularySize;
  c.max_len = max_len;
  c.role_count = 4;
  return c;
}

std::size_t count_type(const model::Sequence& s, Segment t) {
  return static_cast<std::size_t>(std::count(s.types.begin(), s.types.end(), model::type_id(t)));
}

}  // namespace

TEST(Threads, RootWithTwoRepliesGivesTwoDialogues) {
  CommentThread t{"t", {comment("r", std::nullopt, "a"), comment("x", "r", "b"), comment("y", "r", "c")}};
  const auto ds = comments_to_dialogues(t);
  ASSERT_EQ(ds.size(), 2u);
  for (const auto& d : ds) {
    EXPECT_EQ(d.utterances.size(), 2u);
    EXPECT_EQ(d.kind, DialogueKind::kMultiParty);
    EXPECT_EQ(d.utterances[0].speaker, "a");
  }
  EXPECT_EQ(ds[0].utterances[1].speaker, "b");
  EXPECT_EQ(ds[1].utterances[1].speaker, "c");
}

TEST(Threads, LoneRootAndChain) {
  EXPECT_TRUE(comments_to_dialogues({"t", {comment("r", std::nullopt)}}).empty());
  CommentThread chain{"t", {comment("1", std::nullopt, "a"), comment("2", "1", "b"), comment("3", "2", "a"),
                            comment("4", "3", "c")}};
  const auto ds = comments_to_dialogues(chain);
  ASSERT_EQ(ds.size(), 1u);
  ASSERT_EQ(ds[0].utterances.size(), 4u);
  EXPECT_EQ(ds[0].utterances[3].text, "text of 4");
}

TEST(Threads, BrokenLinksAreRejected) {
  CommentThread cyclic{"t", {comment("r", std::nullopt), comment("a", "b"), comment("b", "a")}};
  EXPECT_THROW(comments_to_dialogues(cyclic), ValidationError);
  CommentThread rootless{"t", {comment("a", "b"), comment("b", "a")}};
  EXPECT_THROW(comments_to_dialogues(rootless), ValidationError);
  CommentThread orphan{"t", {comment("r", std::nullopt), comment("a", "zz")}};
  EXPECT_THROW(comments_to_dialogues(orphan), ValidationError);
  CommentThread two_roots{"t", {comment("r", std::nullopt), comment("s", std::nullopt)}};
  EXPECT_THROW(comments_to_dialogues(two_roots), ValidationError);
}

TEST(Threads, DialogueCountEqualsDeepLeafCount) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    CommentThread t{"t", {comment("0", std::nullopt, "s0")}};
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
      parent[i] = rng() % i;
      t.comments.push_back(comment(std::to_string(i), std::to_string(parent[i]), "s" + std::to_string(rng() % 4)));
    }
    std::vector<char> has_child(n, 0);
    for (std::size_t i = 1; i < n; ++i) has_child[parent[i]] = 1;
    std::size_t leaves = 0;
    for (std::size_t i = 1; i < n; ++i) leaves += !has_child[i];
    EXPECT_EQ(comments_to_dialogues(t).size(), leaves);
  }
}

TEST(Threads, NestedJsonIsFlattened) {
  const auto j = nlohmann::json::parse(R"({"kind":"thread","id":"w1","root":{"speaker":"a","text":"hi",
      "replies":[{"speaker":"b","text":"yo","replies":[{"speaker":"a","text":"sup"}]},{"speaker":"c","text":"hey"}]}})");
  const auto ds = comments_to_dialogues(thread_from_json(j, "x"));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].utterances.size(), 3u);
  EXPECT_EQ(ds[0].id.substr(0, 3), "w1/");
}

TEST(Documents, ParagraphsBecomeUtterances) {
  const auto d = text_to_dialogue("First para here.\n\nSecond one.\nThird!\n", "doc", 50);
  ASSERT_EQ(d.utterances.size(), 3u);
  EXPECT_EQ(d.kind, DialogueKind::kSingleParty);
  validate_dialogue(d);
  EXPECT_EQ(text_to_dialogue("Just one sentence.", "d", 50).utterances.size(), 1u);
  EXPECT_THROW(text_to_dialogue(" \n\t\n ", "d", 50), ValidationError);
}

TEST(Documents, LongParagraphIsSplitUnderCap) {
  std::string para;
  for (int s = 0; s < 70; ++s) {
    para += "This sentence number " + std::to_string(s) + " has exactly ten words in it.";
    para += ' ';
  }
  ASSERT_EQ(count_words(para), 700u);
  const auto d = text_to_dialogue(para, "long", 256);
  EXPECT_GE(d.utterances.size(), 3u);
  for (const auto& u : d.utterances) EXPECT_LE(count_words(u.text), 256u);
  std::size_t total = 0;
  for (const auto& u : d.utterances) total += count_words(u.text);
  EXPECT_EQ(total, 700u);
}

TEST(Documents, OverlongSentenceIsHardSplit) {
  std::string sentence;
  for (int i = 0; i < 30; ++i) sentence += "word" + std::to_string(i) + " ";
  const auto d = text_to_dialogue(sentence, "d", 7);
  EXPECT_EQ(d.utterances.size(), 5u);
  for (const auto& u : d.utterances) EXPECT_LE(count_words(u.text), 7u);
}

TEST(Documents, SentenceSplitterHandlesCjk) {
  const auto s = split_sentences("你好。今天很好！Fine. ok");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], "你好。");
  EXPECT_EQ(s[2], "Fine.");
}

namespace {

DialogueSource endless(DialogueKind kind) {
  auto n = std::make_shared<std::size_t>(0);
  return [kind, n]() -> std::optional<Dialogue> {
    return Dialogue{std::to_string((*n)++), kind, {{"a", "x"}, {"b", "y"}}};
  };
}

}  // namespace

TEST(Mixer, EvenRatioDrawsMatchSeededOracle) {
  CorpusMixer mixer(endless(DialogueKind::kSingleParty), endless(DialogueKind::kMultiParty), 1, 1, 2024);
  std::size_t singles = 0;
  for (int i = 0; i < 10000; ++i) singles += mixer.next()->kind == DialogueKind::kSingleParty;
  // Oracle: the same draws, replayed directly.
  std::mt19937_64 rng(2024);
  std::size_t expected = 0;
  for (int i = 0; i < 10000; ++i) expected += static_cast<double>(rng() >> 11) * 0x1.0p-53 < 0.5;
  EXPECT_EQ(singles, expected);
  EXPECT_NEAR(static_cast<double>(singles), 5000.0, 150.0);
  EXPECT_EQ(mixer.single_drawn(), singles);
}

TEST(Mixer, ZeroWeightStreamIsNeverDrawn) {
  CorpusMixer mixer(endless(DialogueKind::kSingleParty), endless(DialogueKind::kMultiParty), 1, 0, 1);
  for (int i = 0; i < 500; ++i) EXPECT_EQ(mixer.next()->kind, DialogueKind::kSingleParty);
  EXPECT_THROW(CorpusMixer(endless(DialogueKind::kSingleParty), endless(DialogueKind::kMultiParty), 0, 0, 1),
               ValidationError);
}

TEST(Mixer, DeterministicAndDrainsBothStreams) {
  std::vector<Dialogue> single, multi;
  for (int i = 0; i < 30; ++i) single.push_back({"s" + std::to_string(i), DialogueKind::kSingleParty, {{"a", "x"}}});
  for (int i = 0; i < 5; ++i) multi.push_back({"m" + std::to_string(i), DialogueKind::kMultiParty, {{"a", "x"}}});
  const auto before = log::warning_count();
  const auto a = mix_corpora(single, multi, 1, 1, 9);
  EXPECT_GT(log::warning_count(), before);
  const auto b = mix_corpora(single, multi, 1, 1, 9);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 35u);
}

TEST(Samples, DialogueWindows) {
  Dialogue d{"d", DialogueKind::kMultiParty, {}};
  for (int i = 0; i < 5; ++i) d.utterances.push_back({i % 2 ? "b" : "a", "u" + std::to_string(i)});
  EXPECT_EQ(dialogue_to_samples({"x", DialogueKind::kMultiParty, {{"a", "1"}, {"b", "2"}, {"a", "3"}}}, 8).size(), 2u);
  for (const auto& s : dialogue_to_samples(d, 1)) EXPECT_EQ(s.context.size(), 1u);
  const auto samples = dialogue_to_samples(d, 3);
  ASSERT_EQ(samples.size(), 4u);
  const auto& t4 = samples[3];
  ASSERT_EQ(t4.context.size(), 3u);
  EXPECT_EQ(t4.context[0].text, "u1");
  EXPECT_EQ(t4.context[2].text, "u3");
  EXPECT_EQ(*t4.target, "u4");
  EXPECT_EQ(t4.responder, "a");
  EXPECT_FALSE(t4.query);
  EXPECT_FALSE(t4.knowledge);
}

TEST(Samples, KnowledgeRecordsExpandToTwoSamples) {
  KnowledgeDialogueRecord r{"r1", {{"a", "who wrote it?"}}, "author of dune", "Frank Herbert wrote Dune.",
                            "It was Frank Herbert.", "b"};
  const auto s = knowledge_record_to_samples(r);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].output_kind, OutputKind::kQuery);
  EXPECT_EQ(*s[0].target, "author of dune");
  EXPECT_FALSE(s[0].knowledge);
  EXPECT_EQ(s[1].output_kind, OutputKind::kResponse);
  EXPECT_EQ(*s[1].knowledge, r.retrieved_knowledge);
  EXPECT_EQ(s[0].source, s[1].source);

  const auto vocab = tokenizer::Vocabulary();
  const auto cfg = byte_config();
  const auto resp = serialize_sample(s[1], vocab, cfg);
  EXPECT_EQ(count_type(resp, Segment::kKnowledge), vocab.encode(r.retrieved_knowledge).size());
  EXPECT_EQ(count_type(resp, Segment::kQuery), 0u);

  r.human_query.clear();
  r.retrieved_knowledge.clear();
  const auto none = knowledge_record_to_samples(r);
  ASSERT_EQ(none.size(), 2u);
  EXPECT_FALSE(none[0].target);
  const auto q = serialize_sample(none[0], vocab, cfg);
  EXPECT_EQ(q.tokens[q.prefix_len + 1], tokenizer::kNoQuery);
  EXPECT_EQ(q.target_count(), 2u);
  EXPECT_FALSE(none[1].knowledge);

  r.retrieved_knowledge = "orphan knowledge";
  EXPECT_THROW(knowledge_record_to_samples(r), ValidationError);
}

TEST(Serialize, LayoutTypesRolesAndMask) {
  TrainingSample s;
  s.context = {{"x", "hi"}, {"y", "yo"}, {"x", "hey"}};
  s.target = "ok";
  s.responder = "y";
  const auto vocab = tokenizer::Vocabulary();
  const auto seq = serialize_sample(s, vocab, byte_config());
  // [SEP h i][SEP y o][SEP h e y] BOS o k EOS
  ASSERT_EQ(seq.size(), 3u + 3u + 4u + 1u + 2u + 1u);
  EXPECT_EQ(seq.prefix_len, 10u);
  EXPECT_EQ(seq.tokens[0], tokenizer::kSep);
  EXPECT_EQ(seq.tokens[10], tokenizer::kBos);
  EXPECT_EQ(seq.tokens.back(), tokenizer::kEos);
  EXPECT_EQ(seq.target_count(), 3u);
  EXPECT_EQ(count_type(seq, Segment::kQuery), 0u);
  EXPECT_EQ(count_type(seq, Segment::kKnowledge), 0u);
  EXPECT_EQ(seq.roles[0], 1);  // x: most recent other speaker
  EXPECT_EQ(seq.roles[3], 0);  // y responds
  EXPECT_EQ(seq.roles[6], 1);
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(seq.positions[i], static_cast<std::int32_t>(i));
  for (std::size_t i = seq.prefix_len; i < seq.size(); ++i) EXPECT_EQ(seq.types[i], 3);
}

TEST(Serialize, RolesFollowRecencyAndCap) {
  TrainingSample s;
  for (const char* who : {"e", "d", "c", "b", "a", "r"}) s.context.push_back({who, "w"});
  s.target = "t";
  s.responder = "r";
  const auto seq = serialize_sample(s, tokenizer::Vocabulary(), byte_config());
  // a is most recent non-responder -> 1, b -> 2, c -> 3, then capped at 3.
  const std::int32_t expected[] = {3, 3, 3, 2, 1, 0};
  for (int u = 0; u < 6; ++u) EXPECT_EQ(seq.roles[u * 2], expected[u]) << u;
}

TEST(Serialize, TruncationDropsOldestContextThenKnowledgeTail) {
  TrainingSample s;
  s.context = {{"a", std::string(30, 'o')}, {"b", std::string(30, 'n')}, {"a", std::string(10, 'z')}};
  s.knowledge = std::string(20, 'k');
  s.query = "q";
  s.target = std::string(8, 't');
  s.responder = "b";
  const auto vocab = tokenizer::Vocabulary();
  // 11 + 20 + 1 + 8 + 1 = 41 once the two older turns are gone.
  auto seq = serialize_sample(s, vocab, byte_config(45));
  EXPECT_EQ(seq.size(), 41u);
  EXPECT_EQ(count_type(seq, Segment::kKnowledge), 20u);
  EXPECT_EQ(seq.tokens[1], vocab.encode("z")[0]);
  EXPECT_EQ(seq.target_count(), 9u);

  seq = serialize_sample(s, vocab, byte_config(35));
  EXPECT_EQ(seq.size(), 35u);
  EXPECT_EQ(count_type(seq, Segment::kKnowledge), 14u);
  EXPECT_EQ(seq.target_count(), 9u);

  try {
    serialize_sample(s, vocab, byte_config(15));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("context [11]"), std::string::npos) << e.what();
  }
}

TEST(Serialize, FuzzedSamplesSatisfyInvariants) {
  std::mt19937_64 rng(17);
  const auto vocab = tokenizer::Vocabulary();
  const auto cfg = byte_config(512);
  for (std::size_t i = 0; i < 300; ++i) {
    const auto d = kdial::testing::random_dialogue(rng, i);
    for (const auto& s : dialogue_to_samples(d, 4)) {
      const auto seq = serialize_sample(s, vocab, cfg);
      model::validate_sequence(seq, cfg);
      EXPECT_EQ(count_type(seq, Segment::kKnowledge) + count_type(seq, Segment::kQuery), 0u);
    }
    const auto r = kdial::testing::random_record(rng, i);
    const auto samples = knowledge_record_to_samples(r);
    ASSERT_EQ(samples.size(), 2u);
    const auto q = serialize_sample(samples[0], vocab, cfg);
    const auto resp = serialize_sample(samples[1], vocab, cfg);
    model::validate_sequence(q, cfg);
    model::validate_sequence(resp, cfg);
    for (std::size_t k = 0; k < resp.prefix_len; ++k) EXPECT_NE(resp.types[k], model::type_id(Segment::kQuery));
    EXPECT_EQ(resp.target_count(), vocab.encode(*samples[1].target).size() + 1);
  }
}

TEST(Serialize, PromptEndsWithBosAndReservesRoom) {
  const std::vector<Utterance> ctx = {{"a", std::string(40, 'x')}, {"b", "hello"}};
  const auto seq = serialize_prompt(ctx, "a", nullptr, Segment::kQuery, tokenizer::Vocabulary(), byte_config(30), 10);
  EXPECT_EQ(seq.tokens.back(), tokenizer::kBos);
  EXPECT_EQ(seq.types.back(), 1);
  EXPECT_EQ(seq.prefix_len + 1, seq.size());
  EXPECT_LE(seq.size() + 10, 30u);
}

TEST(Cleaning, ControlCharactersAndDedup) {
  EXPECT_EQ(strip_control_characters("a\x01" "b\tc\x7f"), "ab c");
  EXPECT_EQ(normalize_whitespace("  a \n\n b  "), "a b");
  Deduplicator dedup;
  EXPECT_TRUE(dedup.insert({"1", DialogueKind::kMultiParty, {{"a", "hi  there"}, {"b", "x"}}}));
  EXPECT_FALSE(dedup.insert({"2", DialogueKind::kMultiParty, {{"a", "hi there "}, {"b", " x"}}}));
  EXPECT_TRUE(dedup.insert({"3", DialogueKind::kMultiParty, {{"a", "hi there"}, {"c", "x"}}}));
  auto cleaned = clean_dialogue({"d", DialogueKind::kMultiParty, {{"a", "\x02\x03"}, {"b", "fine"}}}, {});
  ASSERT_TRUE(cleaned);
  EXPECT_EQ(cleaned->utterances.size(), 1u);
  EXPECT_EQ(cleaned->kind, DialogueKind::kSingleParty);
}

TEST(Pipeline, BuildsDedupedMixedCorpus) {
  std::vector<nlohmann::json> raw = {
      nlohmann::json::parse(R"({"kind":"thread","id":"t1","root":{"speaker":"a","text":"hi","replies":[
          {"speaker":"b","text":"hello"},{"speaker":"c","text":"hey"}]}})"),
      nlohmann::json::parse(R"({"kind":"thread","id":"t2","root":{"speaker":"a","text":"hi","replies":[
          {"speaker":"b","text":"hello"}]}})"),
      nlohmann::json::parse(R"({"kind":"doc","id":"d1","text":"Line one.\nLine two."})")};
  CorpusBuildStats stats;
  const auto ds = build_dialogues(raw, {}, count_words, &stats);
  EXPECT_EQ(stats.threads, 2u);
  EXPECT_EQ(stats.duplicates, 1u);
  EXPECT_EQ(ds.size(), 3u);
  for (const auto& d : ds) validate_dialogue(d);
  raw.push_back({{"kind", "video"}});
  EXPECT_THROW(build_dialogues(raw, {}, count_words), ValidationError);
}

TEST(Json, SampleRoundTrip) {
  KnowledgeDialogueRecord r{"r", {{"a", "q?"}}, "", "", "fine", ""};
  for (const auto& s : knowledge_record_to_samples(r)) EXPECT_EQ(sample_from_json(to_json(s)), s);
  const Dialogue d{"x", DialogueKind::kMultiParty, {{"a", "1"}, {"b", "2"}}};
  EXPECT_EQ(dialogue_from_json(to_json(d)), d);
  EXPECT_TRUE(to_json(knowledge_record_to_samples(r)[0]).at("target").is_null());
}
