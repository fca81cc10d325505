#include "kdial/evaluation/mock.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "kdial/common/error.hpp"

namespace kdial::evaluation {

MockSpec chitchat_spec() {
  MockSpec s;
  s.name = "chitchat";
  s.seed = 11;
  s.rows = {{"baseline-1", {0.304, 0.000, 0.000, 0.386, 0.020}},
            {"baseline-2", {0.826, 0.008, 0.000, 0.920, 0.540}},
            {"baseline-3", {0.930, 0.004, 0.004, 0.922, 0.690}},
            {"internal-only", {0.978, 0.128, 0.112, 0.978, 0.930}},
            {"full", {0.956, 0.164, 0.144, 0.966, 0.940}}};
  return s;
}

MockSpec knowledge_spec() {
  MockSpec s;
  s.name = "knowledge";
  s.seed = 12;
  s.rows = {{"baseline-1", {0.252, 0.004, 0.000, 0.314, 0.020}},
            {"baseline-2", {0.806, 0.060, 0.040, 0.862, 0.530}},
            {"baseline-3", {0.886, 0.108, 0.068, 0.900, 0.650}},
            {"internal-only", {0.976, 0.428, 0.336, 0.986, 0.960}},
            {"full", {0.988, 0.528, 0.444, 0.996, 0.970}}};
  return s;
}

namespace {

constexpr int kNone = -1;

std::size_t idx(Metric m) { return static_cast<std::size_t>(m); }

// Fisher-Yates with a fixed draw so the output is the same on every platform.
template <typename V>
void shuffle(V& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng() % i]);
}

std::size_t units(double mean, std::size_t cells, double step) {
  const double u = mean * static_cast<double>(cells) / step;
  const double r = std::round(u);
  if (std::abs(u - r) > 1e-6) throw ValidationError("mock: mean " + std::to_string(mean) + " is not reachable");
  return static_cast<std::size_t>(r);
}

// Writes h half-units over `slots` as ones and halves, as many nonzero cells as possible.
void place_halves(std::vector<double>& values, const std::vector<std::size_t>& slots, std::size_t h) {
  if (h > 2 * slots.size()) throw ValidationError("mock: target exceeds the available cells");
  const std::size_t ones = h > slots.size() ? h - slots.size() : 0;
  const std::size_t halves = h - 2 * ones;
  for (std::size_t i = 0; i < ones; ++i) values[slots[i]] = 1.0;
  for (std::size_t i = ones; i < ones + halves; ++i) values[slots[i]] = 0.5;
}

double moved(Metric m, double v) {
  if (is_binary(m)) return 1.0 - v;
  return v == 0.5 ? 1.0 : 0.5;
}

}  // namespace

std::vector<AnnotationRecord> make_mock_annotations(const MockSpec& spec) {
  if (spec.annotators < 3) throw ValidationError("mock: need at least 3 annotators for a majority");
  const std::size_t models = spec.rows.size();
  const std::size_t n_utt = spec.dialogues * spec.utterances;
  std::mt19937_64 rng(spec.seed);

  // Voted values, indexed [metric][model * cells + cell].
  std::array<std::vector<double>, 5> voted;
  for (Metric m : kAllMetrics) voted[idx(m)].assign(models * (is_dialogue_level(m) ? spec.dialogues : n_utt), 0.0);

  for (std::size_t mi = 0; mi < models; ++mi) {
    const auto& row = spec.rows[mi];
    std::vector<std::size_t> order(n_utt);
    for (std::size_t i = 0; i < n_utt; ++i) order[i] = mi * n_utt + i;

    shuffle(order, rng);
    place_halves(voted[idx(Metric::kCoherence)], order, units(row.means[idx(Metric::kCoherence)], n_utt, 0.5));
    std::vector<std::size_t> coherent;
    for (std::size_t c : order) {
      if (voted[idx(Metric::kCoherence)][c] > 0.0) coherent.push_back(c);
    }
    shuffle(coherent, rng);
    place_halves(voted[idx(Metric::kSafety)], coherent, units(row.means[idx(Metric::kSafety)], n_utt, 0.5));

    shuffle(order, rng);
    const std::size_t k = units(row.means[idx(Metric::kKnowledgeability)], n_utt, 1.0);
    const std::size_t g = units(row.means[idx(Metric::kGroundedness)], n_utt, 1.0);
    if (g > k) throw ValidationError("mock: groundedness above knowledgeability for " + row.model);
    for (std::size_t i = 0; i < k; ++i) voted[idx(Metric::kKnowledgeability)][order[i]] = 1.0;
    std::vector<std::size_t> known(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    shuffle(known, rng);
    for (std::size_t i = 0; i < g; ++i) voted[idx(Metric::kGroundedness)][known[i]] = 1.0;

    std::vector<std::size_t> dialogues(spec.dialogues);
    for (std::size_t d = 0; d < spec.dialogues; ++d) dialogues[d] = mi * spec.dialogues + d;
    shuffle(dialogues, rng);
    place_halves(voted[idx(Metric::kEngagingness)], dialogues,
                 units(row.means[idx(Metric::kEngagingness)], spec.dialogues, 0.5));
  }

  // Which annotator dissents on each cell, if any.
  std::array<std::vector<int>, 5> dissent;
  for (Metric m : kAllMetrics) dissent[idx(m)].assign(voted[idx(m)].size(), kNone);
  // Groundedness cells already split by a knowledgeability dissent (the dissenter's groundedness becomes invalid).
  std::size_t induced_ground_splits = 0;

  for (Metric m : {Metric::kCoherence, Metric::kSafety, Metric::kKnowledgeability, Metric::kGroundedness,
                   Metric::kEngagingness}) {
    const auto& v = voted[idx(m)];
    std::array<double, 3> share{};
    for (double x : v) share[static_cast<std::size_t>(std::lround(x * 2))] += 1.0 / static_cast<double>(v.size());
    double pe = 0.0;
    for (double p : share) pe += p * p;
    const double wanted = (1.0 - spec.target_kappa) * (1.0 - pe) * 1.5 * static_cast<double>(v.size());
    std::size_t needed = static_cast<std::size_t>(std::llround(wanted));
    if (m == Metric::kGroundedness) needed = needed > induced_ground_splits ? needed - induced_ground_splits : 0;

    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < v.size(); ++c) {
      switch (m) {
        case Metric::kCoherence:
          if (v[c] > 0.0) eligible.push_back(c);
          break;
        case Metric::kSafety:
          if (voted[idx(Metric::kCoherence)][c] > 0.0) eligible.push_back(c);
          break;
        case Metric::kGroundedness:
          if (voted[idx(Metric::kKnowledgeability)][c] == 1.0 && dissent[idx(Metric::kKnowledgeability)][c] == kNone) {
            eligible.push_back(c);
          }
          break;
        default:
          eligible.push_back(c);
      }
    }
    shuffle(eligible, rng);
    if (needed > eligible.size()) needed = eligible.size();
    for (std::size_t i = 0; i < needed; ++i) {
      const std::size_t c = eligible[i];
      dissent[idx(m)][c] = static_cast<int>(rng() % spec.annotators);
      if (m == Metric::kKnowledgeability && v[c] == 1.0 && voted[idx(Metric::kGroundedness)][c] == 1.0) {
        ++induced_ground_splits;
      }
    }
  }

  std::vector<AnnotationRecord> out;
  out.reserve(models * spec.annotators * (n_utt * 4 + spec.dialogues));
  auto score_of = [&](Metric m, std::size_t cell, std::size_t a) {
    const double v = voted[idx(m)][cell];
    return dissent[idx(m)][cell] == static_cast<int>(a) ? moved(m, v) : v;
  };
  for (std::size_t mi = 0; mi < models; ++mi) {
    for (std::size_t d = 0; d < spec.dialogues; ++d) {
      char id[64];
      std::snprintf(id, sizeof id, "%s-%03zu", spec.name.c_str(), d + 1);
      for (std::size_t u = 0; u < spec.utterances; ++u) {
        const std::size_t cell = mi * n_utt + d * spec.utterances + u;
        for (std::size_t a = 0; a < spec.annotators; ++a) {
          std::array<double, 4> s{};
          for (Metric m : {Metric::kCoherence, Metric::kKnowledgeability, Metric::kGroundedness, Metric::kSafety}) {
            s[idx(m)] = score_of(m, cell, a);
          }
          for (Metric m : {Metric::kCoherence, Metric::kKnowledgeability, Metric::kGroundedness, Metric::kSafety}) {
            AnnotationRecord r;
            r.model = spec.rows[mi].model;
            r.dialogue_id = id;
            r.utterance = u + 1;
            r.annotator = "w" + std::to_string(a + 1);
            r.metric = m;
            r.score = s[idx(m)];
            if (auto dep = depends_on(m); dep && s[idx(*dep)] == 0.0) {
              r.invalid = true;
              r.score = 0.0;
            }
            out.push_back(std::move(r));
          }
        }
      }
      for (std::size_t a = 0; a < spec.annotators; ++a) {
        AnnotationRecord r;
        r.model = spec.rows[mi].model;
        r.dialogue_id = id;
        r.annotator = "w" + std::to_string(a + 1);
        r.metric = Metric::kEngagingness;
        r.score = score_of(Metric::kEngagingness, mi * spec.dialogues + d, a);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace kdial::evaluation
