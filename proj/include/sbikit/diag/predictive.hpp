#pragma once

// Prior and posterior predictive checks. An ensemble of simulations at
// parameter draws yields per-coordinate quantile bands; coverage is the
// fraction of observed summary coordinates falling inside each band. Low
// coverage at the widest band flags the model as incompatible with the
// observation. Band levels are central coverages, so the 0.95 band spans the
// 2.5% and 97.5% quantiles.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/parallel.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

// Lo/hi quantiles per summary coordinate at one central coverage level.
struct PredictiveBand {
  double level = 0.0;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct PredictiveEnsemble {
  std::vector<ParamVector> thetas;
  std::vector<SummaryVector> summaries;
  std::vector<double> median;
  std::vector<PredictiveBand> bands;
};

inline std::vector<double> default_band_levels() { return {0.5, 0.95}; }

namespace detail {

inline void check_band_levels(const std::vector<double>& levels) {
  if (levels.empty())
    throw DomainError("predictive bands: no levels given");
  for (double c : levels)
    if (!(c > 0.0 && c < 1.0))
      throw DomainError("predictive bands: level outside (0,1)");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1]))
      throw DomainError("predictive bands: levels must be strictly increasing");
}

}  // namespace detail

// Simulates one summary per parameter draw (slot-seeded, so the result is
// identical for any thread count) and aggregates quantile bands single
// threaded. Band quantiles are monotone in the level, so bands nest.
template <SimulatorModel M>
PredictiveEnsemble simulate_predictive_ensemble(const M& model,
                                                std::vector<ParamVector> thetas,
                                                const std::vector<double>& levels,
                                                const SeedStream& seeds,
                                                unsigned threads = 1) {
  detail::check_band_levels(levels);
  if (thetas.empty())
    throw DomainError("predictive ensemble: no parameter draws");
  for (const auto& t : thetas)
    if (t.size() != model.param_dim())
      throw DimensionError("predictive ensemble: parameter dimension mismatch");

  const std::size_t n = thetas.size();
  PredictiveEnsemble ensemble;
  ensemble.thetas = std::move(thetas);
  ensemble.summaries.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    ensemble.summaries[i] =
        simulate_with_retry(model, ensemble.thetas[i], seeds.sub(i));
  });

  const std::size_t dim = model.summary_dim();
  ensemble.median.resize(dim);
  ensemble.bands.resize(levels.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    ensemble.bands[k].level = levels[k];
    ensemble.bands[k].lo.resize(dim);
    ensemble.bands[k].hi.resize(dim);
  }
  std::vector<double> column(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = ensemble.summaries[i][j];
    ensemble.median[j] = quantile(column, 0.5);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      ensemble.bands[k].lo[j] = quantile(column, 0.5 * (1.0 - levels[k]));
      ensemble.bands[k].hi[j] = quantile(column, 0.5 * (1.0 + levels[k]));
    }
  }
  return ensemble;
}

// Fraction of observed coordinates inside each band, aligned with
// ensemble.bands. Closed intervals: an observation on the band edge counts
// as covered.
inline std::vector<double> band_coverage(const PredictiveEnsemble& ensemble,
                                         const SummaryVector& observed) {
  if (ensemble.bands.empty())
    throw DomainError("band_coverage: ensemble has no bands");
  const std::size_t dim = ensemble.bands[0].lo.size();
  if (observed.size() != dim)
    throw DimensionError("band_coverage: observed dimension mismatch");
  std::vector<double> coverage(ensemble.bands.size(), 0.0);
  for (std::size_t k = 0; k < ensemble.bands.size(); ++k) {
    std::size_t inside = 0;
    for (std::size_t j = 0; j < dim; ++j)
      if (observed[j] >= ensemble.bands[k].lo[j] &&
          observed[j] <= ensemble.bands[k].hi[j])
        ++inside;
    coverage[k] = static_cast<double>(inside) / static_cast<double>(dim);
  }
  return coverage;
}

struct PredictiveCheckResult {
  PredictiveEnsemble ensemble;
  SummaryVector observed;
  std::vector<double> coverage;
  double incompatibility_floor = 0.5;
  bool incompatible = false;
};

namespace detail {

template <SimulatorModel M>
PredictiveCheckResult run_predictive_check(const M& model,
                                           std::vector<ParamVector> thetas,
                                           const SummaryVector& observed,
                                           const std::vector<double>& levels,
                                           const SeedStream& seeds,
                                           unsigned threads,
                                           double incompatibility_floor) {
  if (observed.size() != model.summary_dim())
    throw DimensionError("predictive check: observed dimension mismatch");
  for (double v : observed)
    if (!std::isfinite(v))
      throw DomainError("predictive check: non-finite observed value");
  if (!(incompatibility_floor >= 0.0 && incompatibility_floor <= 1.0))
    throw DomainError("predictive check: floor outside [0,1]");

  PredictiveCheckResult result;
  result.ensemble = simulate_predictive_ensemble(model, std::move(thetas),
                                                 levels, seeds, threads);
  result.observed = observed;
  result.coverage = band_coverage(result.ensemble, observed);
  result.incompatibility_floor = incompatibility_floor;
  // Levels are strictly increasing, so the widest band is last.
  result.incompatible = result.coverage.back() < incompatibility_floor;
  return result;
}

}  // namespace detail

// Prior predictive check: n fresh prior draws. The parameter stream and the
// simulation seed namespace are separated so the draw sequence does not
// depend on how simulations are scheduled.
template <SimulatorModel M>
PredictiveCheckResult prior_predictive_check(
    const M& model, const SummaryVector& observed, std::size_t n = 1000,
    std::vector<double> levels = default_band_levels(), std::uint64_t seed = 1,
    unsigned threads = 1, double incompatibility_floor = 0.5) {
  if (n < 50) throw DomainError("predictive check: need n >= 50 draws");
  const SeedStream seeds{seed};
  Rng prior_rng = seeds.stream(0);
  std::vector<ParamVector> thetas(n);
  for (std::size_t i = 0; i < n; ++i)
    thetas[i] = model.prior().sample(prior_rng);
  return detail::run_predictive_check(model, std::move(thetas), observed,
                                      levels, seeds.sub(1), threads,
                                      incompatibility_floor);
}

// Posterior predictive check over an existing sample set. With more samples
// than draws the set is thinned evenly; with fewer it is cycled.
template <SimulatorModel M>
PredictiveCheckResult posterior_predictive_check(
    const M& model, const std::vector<ParamVector>& samples,
    const SummaryVector& observed, std::size_t n = 1000,
    std::vector<double> levels = default_band_levels(), std::uint64_t seed = 1,
    unsigned threads = 1, double incompatibility_floor = 0.5) {
  if (n < 50) throw DomainError("predictive check: need n >= 50 draws");
  if (samples.empty())
    throw DomainError("predictive check: no posterior samples");
  const std::size_t k = samples.size();
  std::vector<ParamVector> thetas(n);
  for (std::size_t i = 0; i < n; ++i)
    thetas[i] = k >= n ? samples[(i * k) / n] : samples[i % k];
  const SeedStream seeds{seed};
  return detail::run_predictive_check(model, std::move(thetas), observed,
                                      levels, seeds.sub(1), threads,
                                      incompatibility_floor);
}

// One row per (coordinate, level) pair; the pointwise median repeats on each
// of a coordinate's rows so the file stands alone.
inline CsvTable predictive_bands_table(const PredictiveEnsemble& ensemble) {
  CsvTable table;
  table.header = {"coordinate", "level", "lo", "median", "hi"};
  const std::size_t dim = ensemble.median.size();
  for (std::size_t j = 0; j < dim; ++j)
    for (const auto& band : ensemble.bands)
      table.rows.push_back({static_cast<double>(j + 1), band.level,
                            band.lo[j], ensemble.median[j], band.hi[j]});
  return table;
}

inline CsvTable predictive_draws_table(const PredictiveEnsemble& ensemble) {
  CsvTable table;
  table.header = {"draw"};
  const std::size_t param_dim =
      ensemble.thetas.empty() ? 0 : ensemble.thetas[0].size();
  const std::size_t summary_dim =
      ensemble.summaries.empty() ? 0 : ensemble.summaries[0].size();
  for (std::size_t j = 0; j < param_dim; ++j)
    table.header.push_back("theta_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < summary_dim; ++j)
    table.header.push_back("summary_" + std::to_string(j + 1));
  for (std::size_t i = 0; i < ensemble.thetas.size(); ++i) {
    std::vector<double> row;
    row.reserve(1 + param_dim + summary_dim);
    row.push_back(static_cast<double>(i + 1));
    row.insert(row.end(), ensemble.thetas[i].begin(), ensemble.thetas[i].end());
    row.insert(row.end(), ensemble.summaries[i].begin(),
               ensemble.summaries[i].end());
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string predictive_check_json(const PredictiveCheckResult& result) {
  nlohmann::json j;
  j["n_draws"] = result.ensemble.summaries.size();
  j["observed"] = result.observed;
  std::vector<double> levels;
  for (const auto& band : result.ensemble.bands) levels.push_back(band.level);
  j["levels"] = levels;
  j["coverage"] = result.coverage;
  j["incompatibility_floor"] = result.incompatibility_floor;
  j["incompatible"] = result.incompatible;
  return j.dump(2);
}

}  // namespace sbikit
