#include "kdial/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace kdial::numerics {

GradCheckReport finite_difference_report(Graph<double>& graph, NodeId loss, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ValidationError("finite-difference epsilon must lie in [1e-7, 1e-3]");
  }
  auto* params = graph.parameters();
  GradCheckReport report;
  if (params == nullptr) return report;

  graph.reevaluate();
  params->zero_grad();
  graph.accumulate_gradients(loss);

  for (const auto& name : graph.referenced_parameters()) {
    auto& value = params->value(name);
    const auto& grad = params->grad(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + epsilon;
      graph.reevaluate();
      const double up = graph.value(loss).item();
      value[i] = saved - epsilon;
      graph.reevaluate();
      const double down = graph.value(loss).item();
      value[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  graph.reevaluate();
  return report;
}

double finite_difference_check(Graph<double>& graph, NodeId loss, double epsilon) {
  return finite_difference_report(graph, loss, epsilon).max_relative_error;
}

}  // namespace kdial::numerics
