#include "kdial/evaluation/kappa.hpp"

#include <string>

#include "kdial/common/error.hpp"

namespace kdial::evaluation {

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters_per_item) {
  if (raters_per_item < 2) throw ValidationError("fleiss_kappa: need at least 2 raters per item");
  if (counts.empty()) throw ValidationError("fleiss_kappa: no items");
  const std::size_t categories = counts.front().size();
  if (categories == 0) throw ValidationError("fleiss_kappa: no categories");
  const double n = static_cast<double>(raters_per_item);
  std::vector<double> column(categories, 0.0);
  double p_bar = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != categories) throw ShapeError("fleiss_kappa: row " + std::to_string(i) + " has a different width");
    std::size_t total = 0;
    double agree = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      total += row[j];
      column[j] += static_cast<double>(row[j]);
      agree += static_cast<double>(row[j]) * static_cast<double>(row[j] - (row[j] > 0 ? 1 : 0));
    }
    if (total != raters_per_item) {
      throw ValidationError("fleiss_kappa: row " + std::to_string(i) + " sums to " + std::to_string(total) +
                            ", expected " + std::to_string(raters_per_item));
    }
    p_bar += agree / (n * (n - 1.0));
  }
  const double items = static_cast<double>(counts.size());
  p_bar /= items;
  double p_e = 0.0;
  for (double c : column) {
    const double p = c / (items * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) {
    if (p_bar >= 1.0) return 1.0;
    throw ValidationError("fleiss_kappa: degenerate chance agreement");
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

}  // namespace kdial::evaluation
