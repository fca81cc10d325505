#include "kdial/evaluation/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "kdial/common/error.hpp"
#include "kdial/evaluation/kappa.hpp"

namespace kdial::evaluation {

double vote(std::vector<double> votes) {
  if (votes.empty()) throw ValidationError("vote: no votes");
  std::sort(votes.begin(), votes.end());
  std::size_t best_count = 0;
  std::size_t modes = 0;
  double mode = votes.front();
  for (std::size_t i = 0; i < votes.size();) {
    std::size_t j = i;
    while (j < votes.size() && votes[j] == votes[i]) ++j;
    const std::size_t count = j - i;
    if (count > best_count) {
      best_count = count;
      mode = votes[i];
      modes = 1;
    } else if (count == best_count) {
      ++modes;
    }
    i = j;
  }
  if (modes == 1) return mode;
  return votes[(votes.size() - 1) / 2];
}

const ModelReport& MetricReport::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.model == name) return m;
  }
  throw ValidationError("report has no model '" + name + "'");
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [metric, s] : m.metrics) {
      metrics[metric_name(metric)] = {{"mean", s.mean},
                                      {"cells", s.cells},
                                      {"omitted_cells", s.omitted_cells},
                                      {"records", s.records},
                                      {"invalid_records", s.invalid_records}};
    }
    rows.push_back({{"model", m.model}, {"metrics", metrics}});
  }
  nlohmann::json k = nlohmann::json::object();
  for (const auto& [metric, value] : kappa) k[metric_name(metric)] = value;
  return {{"models", rows}, {"kappa", k}, {"mean_kappa", mean_kappa}, {"input_records", input_records}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    for (const auto& row : j.at("models")) {
      ModelReport m;
      m.model = row.at("model").get<std::string>();
      for (const auto& [name, s] : row.at("metrics").items()) {
        MetricSummary summary;
        summary.mean = s.at("mean").get<double>();
        summary.cells = s.at("cells").get<std::size_t>();
        summary.omitted_cells = s.at("omitted_cells").get<std::size_t>();
        summary.records = s.at("records").get<std::size_t>();
        summary.invalid_records = s.at("invalid_records").get<std::size_t>();
        m.metrics[parse_metric(name)] = summary;
      }
      r.models.push_back(std::move(m));
    }
    for (const auto& [name, k] : j.at("kappa").items()) r.kappa[parse_metric(name)] = k.get<double>();
    r.mean_kappa = j.at("mean_kappa").get<double>();
    r.input_records = j.at("input_records").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
  return r;
}

namespace {

constexpr std::size_t kNoUtterance = static_cast<std::size_t>(-1);

using CellKey = std::tuple<std::string, std::string, std::size_t, Metric>;  // model, dialogue, utterance, metric
using RaterKey = std::tuple<std::string, std::string, std::size_t, Metric, std::string>;

std::size_t category_of(double score) { return static_cast<std::size_t>(std::lround(score * 2.0)); }

}  // namespace

MetricReport aggregate(const std::vector<AnnotationRecord>& records, const AggregateOptions& options) {
  MetricReport report;
  report.input_records = records.size();

  std::map<RaterKey, const AnnotationRecord*> by_rater;
  std::vector<std::string> model_order;
  for (const auto& r : records) {
    const RaterKey key{r.model, r.dialogue_id, r.utterance.value_or(kNoUtterance), r.metric, r.annotator};
    if (!by_rater.emplace(key, &r).second) {
      throw ValidationError("duplicate annotation: " + r.model + "/" + r.dialogue_id + " " + r.annotator + " " +
                            metric_name(r.metric));
    }
    if (std::find(model_order.begin(), model_order.end(), r.model) == model_order.end()) {
      model_order.push_back(r.model);
    }
  }

  struct Cell {
    std::vector<double> votes;
    std::vector<double> raw;
    std::size_t invalid = 0;
  };
  std::map<CellKey, Cell> cells;
  for (const auto& r : records) {
    const std::size_t utt = r.utterance.value_or(kNoUtterance);
    // Without siblings only hard errors are reported; a missing invalid flag is repaired by exclusion below.
    if (auto violations = validate_annotation(r, {}); !violations.empty()) throw ValidationError(violations.front());
    bool dependency_zero = false;
    if (auto dep = depends_on(r.metric)) {
      auto it = by_rater.find(RaterKey{r.model, r.dialogue_id, utt, *dep, r.annotator});
      dependency_zero = it != by_rater.end() && it->second->score == 0.0;
    }
    Cell& cell = cells[CellKey{r.model, r.dialogue_id, utt, r.metric}];
    cell.raw.push_back(r.score);
    const bool invalid = r.invalid || dependency_zero;
    if (invalid) {
      ++cell.invalid;
      if (options.policy == InvalidPolicy::kZeroFill) cell.votes.push_back(0.0);
    } else {
      cell.votes.push_back(r.score);
    }
  }

  std::map<std::string, std::map<Metric, std::pair<double, MetricSummary>>> sums;
  std::map<Metric, std::map<std::size_t, std::vector<std::vector<std::size_t>>>> kappa_rows;  // by rater count
  for (const auto& [key, cell] : cells) {
    const auto& [model, dialogue, utt, metric] = key;
    auto& [sum, summary] = sums[model][metric];
    summary.invalid_records += cell.invalid;
    if (cell.votes.empty()) {
      ++summary.omitted_cells;
    } else {
      sum += vote(cell.votes);
      ++summary.cells;
      summary.records += cell.votes.size();
    }
    std::vector<std::size_t> row(3, 0);
    for (double s : cell.raw) ++row[category_of(s)];
    kappa_rows[metric][cell.raw.size()].push_back(std::move(row));
  }

  for (const auto& name : model_order) {
    ModelReport m;
    m.model = name;
    for (const auto& [metric, entry] : sums[name]) {
      MetricSummary s = entry.second;
      s.mean = s.cells > 0 ? entry.first / static_cast<double>(s.cells) : 0.0;
      m.metrics[metric] = s;
    }
    report.models.push_back(std::move(m));
  }

  double kappa_sum = 0.0;
  for (auto& [metric, groups] : kappa_rows) {
    std::size_t raters = 0;
    std::size_t most = 0;
    for (const auto& [count, rows] : groups) {
      if (rows.size() > most || (rows.size() == most && count > raters)) {
        most = rows.size();
        raters = count;
      }
    }
    if (raters < 2) continue;
    auto& rows = groups[raters];
    if (is_binary(metric)) {
      for (auto& row : rows) row.erase(row.begin() + 1);  // drop the unused 0.5 column
    }
    report.kappa[metric] = fleiss_kappa(rows, raters);
    kappa_sum += report.kappa[metric];
  }
  if (!report.kappa.empty()) report.mean_kappa = kappa_sum / static_cast<double>(report.kappa.size());
  return report;
}

double relative_improvement(double value, double base) {
  if (!(base > 0.0)) throw ValidationError("relative_improvement: base must be positive");
  return 100.0 * (value - base) / base;
}

std::string format_percent(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", percent);
  return buf;
}

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_table(const MetricReport& report, const std::string& model, const std::string& baseline) {
  std::size_t name_width = 5;
  for (const auto& m : report.models) name_width = std::max(name_width, m.model.size());
  std::map<Metric, double> best;
  for (const auto& m : report.models) {
    for (const auto& [metric, s] : m.metrics) {
      if (s.cells > 0 && (!best.count(metric) || s.mean > best[metric])) best[metric] = s.mean;
    }
  }
  std::string out = pad("model", name_width, false);
  for (Metric metric : kAllMetrics) out += "  " + pad(metric_name(metric), 16, true);
  out += "\n";
  for (const auto& m : report.models) {
    out += pad(m.model, name_width, false);
    for (Metric metric : kAllMetrics) {
      auto it = m.metrics.find(metric);
      std::string cell = "-";
      if (it != m.metrics.end() && it->second.cells > 0) {
        cell = fixed3(it->second.mean);
        // Marks the best value in the column.
        cell += it->second.mean == best[metric] ? "*" : " ";
      }
      out += "  " + pad(cell, 16, true);
    }
    out += "\n";
  }
  if (!report.kappa.empty()) {
    out += "fleiss kappa:";
    for (const auto& [metric, k] : report.kappa) out += std::string(" ") + metric_name(metric) + "=" + fixed3(k);
    out += " mean=" + fixed3(report.mean_kappa) + "\n";
  }
  std::size_t omitted = 0;
  for (const auto& m : report.models) {
    for (const auto& [metric, s] : m.metrics) omitted += s.omitted_cells;
  }
  if (omitted > 0) out += "omitted cells (no valid vote): " + std::to_string(omitted) + "\n";
  if (!model.empty() && !baseline.empty()) {
    const auto& a = report.model(model);
    const auto& b = report.model(baseline);
    for (Metric metric : kAllMetrics) {
      auto ia = a.metrics.find(metric);
      auto ib = b.metrics.find(metric);
      if (ia == a.metrics.end() || ib == b.metrics.end()) continue;
      std::string line = std::string(metric_name(metric)) + ": " + model + " " + fixed3(ia->second.mean) + " vs " +
                         baseline + " " + fixed3(ib->second.mean);
      if (ib->second.mean > 0.0) {
        line += " (" + format_percent(relative_improvement(ia->second.mean, ib->second.mean)) + ")";
      } else {
        line += " (baseline is 0)";
      }
      out += line + "\n";
    }
  }
  return out;
}

std::string render_csv(const MetricReport& report) {
  std::string out = "model";
  for (Metric metric : kAllMetrics) out += std::string(",") + metric_name(metric);
  out += "\n";
  for (const auto& m : report.models) {
    out += m.model.find(',') == std::string::npos ? m.model : "\"" + m.model + "\"";
    for (Metric metric : kAllMetrics) {
      auto it = m.metrics.find(metric);
      out += ",";
      if (it != m.metrics.end() && it->second.cells > 0) out += fixed3(it->second.mean);
    }
    out += "\n";
  }
  return out;
}

}  // namespace kdial::evaluation
