#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "kdial/common/error.hpp"
#include "kdial/evaluation/aggregate.hpp"
#include "kdial/evaluation/kappa.hpp"
#include "kdial/evaluation/mock.hpp"

namespace kdial::evaluation {
namespace {

AnnotationRecord rec(std::string annotator, Metric m, double score, std::size_t utt = 1, bool invalid = false,
                     std::string model = "m", std::string dialogue = "d1") {
  AnnotationRecord r;
  r.model = std::move(model);
  r.dialogue_id = std::move(dialogue);
  if (!is_dialogue_level(m)) r.utterance = utt;
  r.annotator = std::move(annotator);
  r.metric = m;
  r.score = score;
  r.invalid = invalid;
  return r;
}

// Textbook per-item/chance formula written out independently.
double kappa_oracle(const std::vector<std::vector<std::size_t>>& counts, double n) {
  const double N = static_cast<double>(counts.size());
  const std::size_t k = counts[0].size();
  double pbar = 0;
  std::vector<double> pj(k, 0);
  for (const auto& row : counts) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      s += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      pj[j] += static_cast<double>(row[j]);
    }
    pbar += (s - n) / (n * (n - 1));
  }
  pbar /= N;
  double pe = 0;
  for (double c : pj) pe += (c / (N * n)) * (c / (N * n));
  return (pbar - pe) / (1 - pe);
}

TEST(Annotation, ValidationExamples) {
  const auto k0 = rec("a", Metric::kKnowledgeability, 0);
  const auto g1 = rec("a", Metric::kGroundedness, 1);
  EXPECT_FALSE(validate_annotation(g1, {k0, g1}).empty());
  auto g_flagged = g1;
  g_flagged.invalid = true;
  EXPECT_TRUE(validate_annotation(g_flagged, {k0, g_flagged}).empty());

  EXPECT_FALSE(validate_annotation(rec("a", Metric::kCoherence, 0.7), {}).empty());
  EXPECT_FALSE(validate_annotation(rec("a", Metric::kKnowledgeability, 0.5), {}).empty());
  EXPECT_TRUE(validate_annotation(rec("a", Metric::kCoherence, 0.5), {}).empty());

  const auto c0 = rec("a", Metric::kCoherence, 0);
  EXPECT_FALSE(validate_annotation(rec("a", Metric::kSafety, 1), {c0}).empty());
  EXPECT_TRUE(validate_annotation(rec("a", Metric::kSafety, 1, 1, true), {c0}).empty());
  // A different annotator's zero does not matter.
  EXPECT_TRUE(validate_annotation(rec("b", Metric::kSafety, 1), {c0}).empty());
  // Spurious invalid flag.
  EXPECT_FALSE(validate_annotation(rec("a", Metric::kSafety, 1, 1, true), {rec("a", Metric::kCoherence, 1)}).empty());

  auto engaging_with_utt = rec("a", Metric::kEngagingness, 1);
  engaging_with_utt.utterance = 3;
  EXPECT_FALSE(validate_annotation(engaging_with_utt, {}).empty());
  auto coherence_without_utt = rec("a", Metric::kCoherence, 1);
  coherence_without_utt.utterance.reset();
  EXPECT_FALSE(validate_annotation(coherence_without_utt, {}).empty());
}

TEST(Annotation, JsonRoundTrip) {
  const auto r = rec("w2", Metric::kGroundedness, 0, 4, true, "full", "x-1");
  const auto back = annotation_from_json(to_json(r));
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.dialogue_id, r.dialogue_id);
  EXPECT_EQ(back.utterance, r.utterance);
  EXPECT_EQ(back.metric, r.metric);
  EXPECT_TRUE(back.invalid);
  EXPECT_THROW(annotation_from_json({{"dialogue", "d"}, {"annotator", "a"}, {"metric", "fun"}, {"score", 1}}),
               ValidationError);
  EXPECT_THROW(annotation_from_json({{"dialogue", "d"}, {"annotator", "a"}, {"metric", "safety"}, {"score", 1},
                                     {"colour", "red"}}),
               FormatError);
}

TEST(Vote, Examples) {
  EXPECT_EQ(vote({1, 1, 0}), 1);
  EXPECT_EQ(vote({0, 0.5, 1}), 0.5);
  EXPECT_EQ(vote({1, 0}), 0);
  EXPECT_EQ(vote({0.5}), 0.5);
  EXPECT_THROW(vote({}), ValidationError);
}

TEST(Vote, ExhaustiveThreeVoteMultisets) {
  const std::vector<double> scale = {0, 0.5, 1};
  for (double a : scale) {
    for (double b : scale) {
      for (double c : scale) {
        std::vector<double> v = {a, b, c};
        double expected;
        if (a == b || a == c) {
          expected = a;
        } else if (b == c) {
          expected = b;
        } else {
          expected = 0.5;  // all different: the middle value
        }
        EXPECT_EQ(vote(v), expected) << a << b << c;
      }
    }
  }
}

TEST(Kappa, UnanimousOnDifferentCategories) {
  EXPECT_NEAR(fleiss_kappa({{3, 0}, {0, 3}}, 3), 1.0, 1e-12);
}

TEST(Kappa, HandOracles) {
  // One item split 2-1: P = 1/3, p = (2/3, 1/3), Pe = 5/9, kappa = (1/3 - 5/9) / (4/9) = -1/2.
  EXPECT_NEAR(fleiss_kappa({{2, 1}}, 3), -0.5, 1e-12);
  const std::vector<std::vector<std::size_t>> table = {{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6},
                                                       {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1}, {7, 7, 0, 0, 0},
                                                       {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0},
                                                       {0, 2, 2, 3, 7}};
  EXPECT_NEAR(fleiss_kappa(table, 14), kappa_oracle(table, 14), 1e-12);
  EXPECT_NEAR(fleiss_kappa(table, 14), 0.20993070442195522, 1e-12);
}

TEST(Kappa, DegenerateAndErrors) {
  EXPECT_EQ(fleiss_kappa({{3, 0}, {3, 0}}, 3), 1.0);
  EXPECT_THROW(fleiss_kappa({{2, 0}}, 3), ValidationError);
  EXPECT_THROW(fleiss_kappa({{1}}, 1), ValidationError);
  EXPECT_THROW(fleiss_kappa({}, 3), ValidationError);
}

TEST(Kappa, RandomRatersNearZero) {
  std::mt19937_64 rng(42);
  std::vector<std::vector<std::size_t>> counts(1000, std::vector<std::size_t>(4, 0));
  for (auto& row : counts) {
    for (int r = 0; r < 3; ++r) ++row[rng() % 4];
  }
  EXPECT_LT(std::abs(fleiss_kappa(counts, 3)), 0.05);
}

TEST(Kappa, ColumnPermutationInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<std::size_t>> counts(20, std::vector<std::size_t>(3, 0));
    for (auto& row : counts) {
      for (int r = 0; r < 4; ++r) ++row[rng() % 3];
    }
    std::vector<std::size_t> perm = {0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = counts;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) permuted[i][perm[j]] = counts[i][j];
    }
    EXPECT_NEAR(fleiss_kappa(counts, 4), fleiss_kappa(permuted, 4), 1e-12);
  }
}

TEST(RelativeImprovement, Examples) {
  EXPECT_EQ(format_percent(relative_improvement(0.940, 0.690)), "+36.2%");
  EXPECT_EQ(format_percent(relative_improvement(0.970, 0.650)), "+49.2%");
  EXPECT_EQ(format_percent(relative_improvement(0.3, 0.3)), "+0.0%");
  EXPECT_THROW(relative_improvement(1, 0), ValidationError);
  EXPECT_THROW(relative_improvement(1, -1), ValidationError);
}

TEST(Aggregate, InvalidRecordsNeverVote) {
  // Annotator a: knowledgeability 0 but groundedness 1 (unflagged). b, c: knowledgeability 1, groundedness 0.
  std::vector<AnnotationRecord> rs = {rec("a", Metric::kKnowledgeability, 0), rec("a", Metric::kGroundedness, 1),
                                      rec("b", Metric::kKnowledgeability, 1), rec("b", Metric::kGroundedness, 0),
                                      rec("c", Metric::kKnowledgeability, 1), rec("c", Metric::kGroundedness, 1)};
  // Valid groundedness votes {0, 1} -> lower median 0; a's 1 would have made it 1.
  auto report = aggregate(rs);
  const auto& g = report.model("m").metrics.at(Metric::kGroundedness);
  EXPECT_EQ(g.mean, 0.0);
  EXPECT_EQ(g.records, 2u);
  EXPECT_EQ(g.invalid_records, 1u);

  auto zero = aggregate(rs, {InvalidPolicy::kZeroFill});
  EXPECT_EQ(zero.model("m").metrics.at(Metric::kGroundedness).mean, 0.0);
  EXPECT_EQ(zero.model("m").metrics.at(Metric::kGroundedness).records, 3u);
}

TEST(Aggregate, EmptyCellsAreOmittedAndCounted) {
  std::vector<AnnotationRecord> rs;
  for (const char* a : {"a", "b", "c"}) {
    rs.push_back(rec(a, Metric::kCoherence, 0, 1));
    rs.push_back(rec(a, Metric::kSafety, 0, 1, true));
    rs.push_back(rec(a, Metric::kCoherence, 1, 2));
    rs.push_back(rec(a, Metric::kSafety, 1, 2));
  }
  const auto report = aggregate(rs);
  const auto& s = report.model("m").metrics.at(Metric::kSafety);
  EXPECT_EQ(s.cells, 1u);
  EXPECT_EQ(s.omitted_cells, 1u);
  EXPECT_EQ(s.mean, 1.0);
  EXPECT_EQ(aggregate(rs, {InvalidPolicy::kZeroFill}).model("m").metrics.at(Metric::kSafety).mean, 0.5);
  EXPECT_NE(render_table(report).find("omitted cells"), std::string::npos);
}

TEST(Aggregate, RejectsBadRecords) {
  EXPECT_THROW(aggregate({rec("a", Metric::kCoherence, 0.7)}), ValidationError);
  EXPECT_THROW(aggregate({rec("a", Metric::kCoherence, 1), rec("a", Metric::kCoherence, 0)}), ValidationError);
}

TEST(Aggregate, OrderInvariant) {
  auto rs = make_mock_annotations([] {
    auto s = chitchat_spec();
    s.dialogues = 6;
    s.rows = {{"x", {0.5, 0.2, 0.1, 0.6, 0.5}}, {"y", {0.9, 0.5, 0.3, 0.8, 0.5}}};
    return s;
  }());
  const auto base = aggregate(rs).to_json();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(rs.begin(), rs.end(), rng);
    auto shuffled = aggregate(rs).to_json();
    // Model order follows first appearance; compare per model.
    for (const auto& m : base.at("models")) {
      bool found = false;
      for (const auto& o : shuffled.at("models")) {
        if (o.at("model") == m.at("model")) {
          EXPECT_EQ(o, m);
          found = true;
        }
      }
      EXPECT_TRUE(found);
    }
    EXPECT_EQ(shuffled.at("kappa"), base.at("kappa"));
  }
}

void expect_reproduces(const MockSpec& spec, const std::vector<AnnotationRecord>& records) {
  const auto zero = aggregate(records, {InvalidPolicy::kZeroFill});
  ASSERT_EQ(zero.models.size(), spec.rows.size());
  for (const auto& row : spec.rows) {
    const auto& m = zero.model(row.model);
    for (Metric metric : kAllMetrics) {
      EXPECT_NEAR(m.metrics.at(metric).mean, row.means[static_cast<std::size_t>(metric)], 1e-12)
          << row.model << " " << metric_name(metric);
    }
  }
  const auto excl = aggregate(records);
  for (const auto& row : spec.rows) {
    const auto& m = excl.model(row.model);
    for (Metric metric : {Metric::kCoherence, Metric::kKnowledgeability, Metric::kEngagingness}) {
      EXPECT_NEAR(m.metrics.at(metric).mean, row.means[static_cast<std::size_t>(metric)], 1e-12);
    }
  }
  EXPECT_GE(excl.mean_kappa, 0.6);
  EXPECT_LE(excl.mean_kappa, 0.7);
  // Every record passes validation against its siblings.
  std::map<std::tuple<std::string, std::string, std::size_t, std::string>, std::vector<AnnotationRecord>> groups;
  for (const auto& r : records) groups[{r.model, r.dialogue_id, r.utterance.value_or(0), r.annotator}].push_back(r);
  for (const auto& [_, g] : groups) {
    for (const auto& r : g) ASSERT_TRUE(validate_annotation(r, g).empty());
  }
}

TEST(Mock, ChitchatReproducesTargets) {
  const auto spec = chitchat_spec();
  expect_reproduces(spec, make_mock_annotations(spec));
}

TEST(Mock, KnowledgeReproducesTargets) {
  const auto spec = knowledge_spec();
  expect_reproduces(spec, make_mock_annotations(spec));
}

TEST(Mock, ShippedFilesMatchGenerator) {
  const std::string dir = std::string(KDIAL_DATA_DIR) + "/mock_annotations/";
  for (const auto& spec : {chitchat_spec(), knowledge_spec()}) {
    const auto path = dir + spec.name + ".jsonl";
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    const auto shipped = read_annotations(path);
    const auto generated = make_mock_annotations(spec);
    ASSERT_EQ(shipped.size(), generated.size());
    for (std::size_t i = 0; i < shipped.size(); ++i) {
      ASSERT_EQ(to_json(shipped[i]), to_json(generated[i])) << i;
    }
  }
}

TEST(Report, TableAndCsv) {
  const auto report = aggregate(make_mock_annotations(chitchat_spec()), {InvalidPolicy::kZeroFill});
  const auto table = render_table(report, "full", "baseline-3");
  EXPECT_NE(table.find("engagingness: full 0.940 vs baseline-3 0.690 (+36.2%)"), std::string::npos) << table;
  EXPECT_NE(table.find("0.940*"), std::string::npos);
  EXPECT_NE(table.find("0.978*"), std::string::npos);
  const auto csv = render_csv(report);
  EXPECT_NE(csv.find("full,0.956,0.164,0.144,0.966,0.940"), std::string::npos) << csv;
  EXPECT_THROW(render_table(report, "full", "nobody"), ValidationError);
  const auto back = metric_report_from_json(report.to_json());
  EXPECT_EQ(back.to_json(), report.to_json());
  EXPECT_EQ(render_table(back, "full", "baseline-3"), table);
}

}  // namespace
}  // namespace kdial::evaluation
