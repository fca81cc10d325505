#include "kdial/evaluation/annotation.hpp"

#include <cmath>

#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"

namespace kdial::evaluation {

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kCoherence: return "coherence";
    case Metric::kKnowledgeability: return "knowledgeability";
    case Metric::kGroundedness: return "groundedness";
    case Metric::kSafety: return "safety";
    case Metric::kEngagingness: return "engagingness";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (name == metric_name(m)) return m;
  }
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

bool is_binary(Metric m) { return m == Metric::kKnowledgeability || m == Metric::kGroundedness; }
bool is_dialogue_level(Metric m) { return m == Metric::kEngagingness; }

std::optional<Metric> depends_on(Metric m) {
  if (m == Metric::kGroundedness) return Metric::kKnowledgeability;
  if (m == Metric::kSafety) return Metric::kCoherence;
  return std::nullopt;
}

nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j = {{"model", r.model},
                      {"dialogue", r.dialogue_id},
                      {"annotator", r.annotator},
                      {"metric", metric_name(r.metric)},
                      {"score", r.score}};
  if (r.utterance) j["utterance"] = *r.utterance;
  if (r.invalid) j["invalid"] = true;
  return j;
}

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("annotation must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "model" && key != "dialogue" && key != "annotator" && key != "metric" && key != "score" &&
        key != "utterance" && key != "invalid") {
      throw FormatError("annotation: unknown field '" + key + "'");
    }
  }
  AnnotationRecord r;
  try {
    r.model = j.value("model", std::string("model"));
    r.dialogue_id = j.at("dialogue").get<std::string>();
    r.annotator = j.at("annotator").get<std::string>();
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.score = j.at("score").get<double>();
    if (j.contains("utterance") && !j.at("utterance").is_null()) r.utterance = j.at("utterance").get<std::size_t>();
    r.invalid = j.value("invalid", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("annotation: ") + e.what());
  }
  return r;
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  std::vector<AnnotationRecord> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    try {
      out.push_back(annotation_from_json(j));
    } catch (const Error& e) {
      throw FormatError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

namespace {

bool in_scale(Metric m, double s) {
  if (is_binary(m)) return s == 0.0 || s == 1.0;
  return s == 0.0 || s == 0.5 || s == 1.0;
}

std::string where(const AnnotationRecord& r) {
  std::string s = r.model + "/" + r.dialogue_id;
  if (r.utterance) s += "#" + std::to_string(*r.utterance);
  return s + " " + r.annotator + " " + metric_name(r.metric);
}

}  // namespace

std::vector<std::string> validate_annotation(const AnnotationRecord& r, const std::vector<AnnotationRecord>& siblings) {
  std::vector<std::string> v;
  if (!std::isfinite(r.score) || !in_scale(r.metric, r.score)) {
    v.push_back(where(r) + ": score " + std::to_string(r.score) + " outside " +
                (is_binary(r.metric) ? "{0, 1}" : "{0, 0.5, 1}"));
  }
  if (is_dialogue_level(r.metric) && r.utterance) v.push_back(where(r) + ": dialogue-level metric has an utterance index");
  if (!is_dialogue_level(r.metric) && !r.utterance) v.push_back(where(r) + ": utterance-level metric lacks an utterance index");

  if (auto dep = depends_on(r.metric)) {
    const AnnotationRecord* parent = nullptr;
    for (const auto& s : siblings) {
      if (s.metric == *dep && s.model == r.model && s.dialogue_id == r.dialogue_id && s.utterance == r.utterance &&
          s.annotator == r.annotator) {
        parent = &s;
      }
    }
    if (parent != nullptr) {
      const bool should_be_invalid = parent->score == 0.0;
      if (should_be_invalid && !r.invalid) {
        v.push_back(where(r) + ": must be flagged invalid because " + metric_name(*dep) + " is 0");
      } else if (!should_be_invalid && r.invalid) {
        v.push_back(where(r) + ": flagged invalid although " + metric_name(*dep) + " is nonzero");
      }
    }
  } else if (r.invalid) {
    v.push_back(where(r) + ": only groundedness and safety can be invalid");
  }
  return v;
}

}  // namespace kdial::evaluation
