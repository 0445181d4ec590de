#pragma once

// Univariate slice sampler (Neal 2003): stepping-out then shrinkage.
// Used for the component-wise updates of summary adjustment parameters.

#include <cmath>
#include <functional>
#include <limits>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/rng.hpp"

namespace sbikit {

inline double slice_sample(const std::function<double(double)>& log_f,
                           double x0, double width, Rng& rng,
                           int max_step_out = 50) {
  const double f0 = log_f(x0);
  if (!std::isfinite(f0))
    throw DomainError("slice_sample: log density not finite at start point");
  const double log_y = f0 + std::log(1.0 - rng.uniform());  // log of y ~ U(0, f(x0))

  // Stepping out.
  double lo = x0 - width * rng.uniform();
  double hi = lo + width;
  int j = max_step_out;
  int k = max_step_out;
  while (j-- > 0 && log_f(lo) > log_y) lo -= width;
  while (k-- > 0 && log_f(hi) > log_y) hi += width;

  // Shrinkage.
  for (int it = 0; it < 1000; ++it) {
    const double x1 = rng.uniform(lo, hi);
    if (log_f(x1) > log_y) return x1;
    if (x1 < x0)
      lo = x1;
    else
      hi = x1;
  }
  return x0;  // interval collapsed to numerical noise; keep current point
}

}  // namespace sbikit
