#pragma once

// Pre-analysis cost profiling: time each of n prior-predictive simulations
// individually, then summarise as min/max/mean plus a histogram. The spread
// matters as much as the mean, because simulation time can vary by orders of
// magnitude across the parameter space.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/diag/histogram.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

// Monotonic time source in seconds. Injectable so tests can drive the
// profiler with a deterministic clock.
using ClockFn = std::function<double()>;

inline double steady_clock_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct CostProfile {
  std::vector<double> seconds;
  Histogram histogram;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
  double mean_seconds = 0.0;

  double total_seconds() const {
    double s = 0.0;
    for (double v : seconds) s += v;
    return s;
  }
};

// Runs n simulations at prior draws, timing each one. Timing is sequential
// on purpose: per-simulation wall time is only meaningful without thread
// contention. A simulation failure aborts the profile and reports which draw
// failed. Recorded times are floored at 1ns so a call faster than the clock
// granularity still registers as positive.
template <SimulatorModel M>
CostProfile profile_cost(const M& model, std::size_t n = 1000,
                         std::uint64_t seed = 1, std::size_t n_bins = 20,
                         ClockFn clock = {}) {
  if (n < 1) throw DomainError("profile_cost: n must be >= 1");
  if (!clock) clock = steady_clock_seconds;

  const SeedStream seeds{seed};
  Rng prior_rng = seeds.stream(0);
  const SeedStream sim_seeds = seeds.sub(1);

  CostProfile profile;
  profile.seconds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ParamVector theta = model.prior().sample(prior_rng);
    const double t0 = clock();
    try {
      simulate_checked(model, theta, sim_seeds.derive(i));
    } catch (const SimulationError& e) {
      throw SimulationError("profile_cost: simulation " + std::to_string(i) +
                            " of " + std::to_string(n) +
                            " failed: " + e.what());
    }
    const double dt = clock() - t0;
    profile.seconds.push_back(dt > 1e-9 ? dt : 1e-9);
  }

  profile.min_seconds = profile.seconds[0];
  profile.max_seconds = profile.seconds[0];
  double sum = 0.0;
  for (double v : profile.seconds) {
    profile.min_seconds = std::min(profile.min_seconds, v);
    profile.max_seconds = std::max(profile.max_seconds, v);
    sum += v;
  }
  profile.mean_seconds = sum / static_cast<double>(n);
  profile.histogram = make_histogram(profile.seconds, n_bins);
  return profile;
}

inline CsvTable cost_profile_table(const CostProfile& profile) {
  CsvTable table;
  table.header = {"sim", "seconds"};
  for (std::size_t i = 0; i < profile.seconds.size(); ++i)
    table.rows.push_back(
        {static_cast<double>(i + 1), profile.seconds[i]});
  return table;
}

// Machine-readable index for the profile; the per-simulation times live in
// the CSV, this carries the aggregates.
inline std::string cost_profile_json(const CostProfile& profile) {
  nlohmann::json j;
  j["n"] = profile.seconds.size();
  j["min_seconds"] = profile.min_seconds;
  j["max_seconds"] = profile.max_seconds;
  j["mean_seconds"] = profile.mean_seconds;
  j["total_seconds"] = profile.total_seconds();
  j["histogram"]["edges"] = profile.histogram.edges;
  j["histogram"]["counts"] = profile.histogram.counts;
  return j.dump(2);
}

}  // namespace sbikit
