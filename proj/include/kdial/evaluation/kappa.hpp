#pragma once

#include <cstddef>
#include <vector>

namespace kdial::evaluation {

/// Fleiss' kappa over an item x category tally matrix where every row sums
/// to `raters_per_item` (>= 2). When all ratings fall in one category the
/// chance term is 1; that case returns 1.0 if agreement is perfect and
/// throws ValidationError otherwise.
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters_per_item);

}  // namespace kdial::evaluation
