#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kdial/evaluation/annotation.hpp"

namespace kdial::evaluation {

/// Target voted means for one model, in kAllMetrics order.
struct TargetRow {
  std::string model;
  std::array<double, 5> means;
};

struct MockSpec {
  std::string name;  // dialogue id prefix
  std::vector<TargetRow> rows;
  std::size_t dialogues = 50;
  std::size_t utterances = 10;  // generated utterances per dialogue
  std::size_t annotators = 3;
  double target_kappa = 0.653;
  std::uint64_t seed = 1;
};

// The two shipped evaluation sets: chit-chat and knowledge-intensive topics.
MockSpec chitchat_spec();
MockSpec knowledge_spec();

/// Builds annotations whose zero-filled votes reproduce `spec.rows` exactly.
///
/// Construction: per model and metric, voted values are laid out as k ones and
/// h halves (h as large as the slots allow) so that the sum matches the target.
/// Safety is placed only on utterances with nonzero coherence and groundedness
/// only where knowledgeability is 1. All annotators agree except on D cells per
/// metric, where one annotator moves by one step; D is chosen from the voted
/// marginals so that a single 2-1 split per disagreeing cell gives
/// kappa = target, i.e. D = (1 - target) * (1 - Pe) * 1.5 * cells.
/// Coherence never moves to or from 0 and at most one dependent pair differs
/// per cell, so every majority survives both invalid policies.
std::vector<AnnotationRecord> make_mock_annotations(const MockSpec& spec);

}  // namespace kdial::evaluation
