#pragma once

#include <cmath>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

enum class SummaryMetric { euclidean, scaled_euclidean };

// Discrepancy between simulated and observed summaries. The scaled variant
// divides each coordinate difference by a positive scale before the norm.
inline double discrepancy(const SummaryVector& a, const SummaryVector& b,
                          SummaryMetric metric = SummaryMetric::euclidean,
                          const std::vector<double>& scales = {}) {
  if (a.size() != b.size())
    throw DimensionError("discrepancy: summary dimension mismatch");
  if (metric == SummaryMetric::scaled_euclidean) {
    if (scales.size() != a.size())
      throw DimensionError("discrepancy: scales dimension mismatch");
    for (double s : scales)
      if (!(s > 0.0)) throw DomainError("discrepancy: scales must be positive");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (metric == SummaryMetric::scaled_euclidean) d /= scales[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace sbikit
