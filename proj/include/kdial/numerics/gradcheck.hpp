#pragma once

#include "kdial/numerics/graph.hpp"

namespace kdial::numerics {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares back-propagated gradients with central differences for every
/// entry of every parameter the graph references, using the inputs most
/// recently bound by `evaluate`. Relative error per entry is
/// |analytic - fd| / max(|analytic|, |fd|, 1e-8). Requires 64-bit mode and
/// epsilon in [1e-7, 1e-3]. Parameter values are restored on return.
GradCheckReport finite_difference_report(Graph<double>& graph, NodeId loss, double epsilon);

double finite_difference_check(Graph<double>& graph, NodeId loss, double epsilon);

}  // namespace kdial::numerics
