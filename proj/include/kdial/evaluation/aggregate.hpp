#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/evaluation/annotation.hpp"

namespace kdial::evaluation {

/// What happens to records that are invalid (flagged, or whose dependency
/// score is 0). kExclude drops them before voting; kZeroFill votes them as 0.
enum class InvalidPolicy { kExclude, kZeroFill };

/// Majority vote; without a unique mode, the median of the votes (the lower
/// median for an even count).
double vote(std::vector<double> votes);

struct MetricSummary {
  double mean = 0.0;
  std::size_t cells = 0;          // voted cells contributing to the mean
  std::size_t omitted_cells = 0;  // cells left empty after filtering
  std::size_t records = 0;        // records that reached a vote
  std::size_t invalid_records = 0;
};

struct ModelReport {
  std::string model;
  std::map<Metric, MetricSummary> metrics;
};

struct MetricReport {
  std::vector<ModelReport> models;  // in first-appearance order
  std::map<Metric, double> kappa;   // per metric, over all models' cells
  double mean_kappa = 0.0;          // unweighted over the metrics in `kappa`
  std::size_t input_records = 0;

  const ModelReport& model(const std::string& name) const;
  nlohmann::json to_json() const;
};

MetricReport metric_report_from_json(const nlohmann::json& j);

struct AggregateOptions {
  InvalidPolicy policy = InvalidPolicy::kExclude;
};

/// Votes every (model, dialogue, utterance, metric) cell over its annotators
/// and averages the voted values per model and metric, globally over
/// utterances. Records with range or level violations throw ValidationError.
/// Kappa uses the raw scores of cells rated by the most common number of
/// annotators.
MetricReport aggregate(const std::vector<AnnotationRecord>& records, const AggregateOptions& options = {});

/// 100 * (value - base) / base. Throws ValidationError when base <= 0.
double relative_improvement(double value, double base);
std::string format_percent(double percent);  // one decimal, e.g. "36.2%"

/// Aligned text table (one row per model, the best value per column marked
/// with '*'), followed by kappa and, when both names are given, improvement
/// lines of `model` over `baseline`.
std::string render_table(const MetricReport& report, const std::string& model = "", const std::string& baseline = "");
std::string render_csv(const MetricReport& report);

}  // namespace kdial::evaluation
