#pragma once

// Chooses the number of simulations per synthetic-likelihood estimate. The
// log synthetic likelihood at a fixed theta is itself random through the
// estimated moments; its standard deviation shrinks as m grows. The usual
// working band is [1, 2]: much noisier and the pseudo-marginal chain sticks,
// much tighter and simulations are being wasted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sbikit/bsl/synthetic_likelihood.hpp"
#include "sbikit/core/errors.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

struct MTuningRow {
  std::size_t m = 0;
  // Standard deviation of the log synthetic likelihood over the replicate
  // estimates; NaN when any replicate had a singular covariance.
  double std_log_sl = std::numeric_limits<double>::quiet_NaN();
};

struct MTuningResult {
  std::size_t selected_m = 0;
  // False when no candidate landed in [1, 2] and the selection fell back to
  // the candidate closest to 1.5.
  bool in_range = false;
  std::vector<MTuningRow> table;
};

template <SimulatorModel M>
MTuningResult tune_m(const M& model, const ParamVector& theta_central,
                     const SummaryVector& observed_summary,
                     std::vector<std::size_t> candidate_ms, std::size_t reps,
                     const SeedStream& seeds, unsigned threads = 1) {
  if (candidate_ms.empty())
    throw ConfigError("tune_m: no candidate values for m");
  if (reps < 2) throw ConfigError("tune_m: need at least 2 replicates");
  if (!model.prior().in_support(theta_central))
    throw DomainError("tune_m: central parameter outside prior support");
  std::sort(candidate_ms.begin(), candidate_ms.end());
  candidate_ms.erase(
      std::unique(candidate_ms.begin(), candidate_ms.end()),
      candidate_ms.end());

  MTuningResult result;
  result.table.reserve(candidate_ms.size());
  for (std::size_t c = 0; c < candidate_ms.size(); ++c) {
    MTuningRow row;
    row.m = candidate_ms[c];
    std::vector<double> logliks;
    logliks.reserve(reps);
    bool singular = false;
    for (std::size_t r = 0; r < reps && !singular; ++r) {
      try {
        logliks.push_back(
            estimate_synthetic_loglik(model, theta_central, row.m,
                                      observed_summary, seeds.sub(c).sub(r),
                                      threads)
                .log_density_at_observed);
      } catch (const SingularCovarianceError&) {
        singular = true;
      }
    }
    if (!singular) row.std_log_sl = std::sqrt(variance(logliks));
    result.table.push_back(row);
  }

  // Smallest m whose band check passes; candidates arrive sorted.
  for (const MTuningRow& row : result.table) {
    if (std::isfinite(row.std_log_sl) && row.std_log_sl >= 1.0 &&
        row.std_log_sl <= 2.0) {
      result.selected_m = row.m;
      result.in_range = true;
      return result;
    }
  }
  // Fallback: closest finite std to the band centre.
  double best_gap = std::numeric_limits<double>::infinity();
  for (const MTuningRow& row : result.table) {
    if (!std::isfinite(row.std_log_sl)) continue;
    const double gap = std::abs(row.std_log_sl - 1.5);
    if (gap < best_gap) {
      best_gap = gap;
      result.selected_m = row.m;
    }
  }
  if (!std::isfinite(best_gap))
    throw SingularCovarianceError(
        "tune_m: every candidate produced a singular covariance");
  result.in_range = false;
  return result;
}

inline CsvTable tune_m_table(const MTuningResult& result) {
  CsvTable table;
  table.header = {"m", "std_log_sl"};
  for (const MTuningRow& row : result.table)
    table.rows.push_back(
        {static_cast<double>(row.m), row.std_log_sl});
  return table;
}

}  // namespace sbikit
