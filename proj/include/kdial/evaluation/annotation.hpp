#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace kdial::evaluation {

enum class Metric { kCoherence, kKnowledgeability, kGroundedness, kSafety, kEngagingness };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::kCoherence, Metric::kKnowledgeability,
                                                      Metric::kGroundedness, Metric::kSafety, Metric::kEngagingness};

const char* metric_name(Metric m);
Metric parse_metric(std::string_view name);

// Binary metrics take {0, 1}; the others {0, 0.5, 1}.
bool is_binary(Metric m);
bool is_dialogue_level(Metric m);
// The metric whose zero score invalidates `m` for the same annotator, if any.
std::optional<Metric> depends_on(Metric m);

/// One annotator's judgment of one utterance (or of a whole dialogue for
/// engagingness).
struct AnnotationRecord {
  std::string model;
  std::string dialogue_id;
  std::optional<std::size_t> utterance;  // absent for dialogue-level metrics
  std::string annotator;
  Metric metric = Metric::kCoherence;
  double score = 0.0;
  bool invalid = false;
};

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const nlohmann::json& j);
std::vector<AnnotationRecord> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

/// Checks score range, level, and the invalid flag against the annotator's
/// other judgments of the same utterance. `siblings` may include `r` itself.
/// Returns human-readable violations; empty means valid.
std::vector<std::string> validate_annotation(const AnnotationRecord& r, const std::vector<AnnotationRecord>& siblings);

}  // namespace kdial::evaluation
