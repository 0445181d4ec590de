#pragma once

// The simulator contract. A model exposes its parameter/summary dimensions,
// its prior, and a pure function (theta, seed) -> summary vector. Everything
// downstream (SMC, synthetic likelihood, neural estimators, diagnostics) is
// templated on this concept.

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

template <class M>
concept SimulatorModel = requires(const M& m, const ParamVector& theta,
                                  std::uint64_t seed) {
  { m.param_dim() } -> std::convertible_to<std::size_t>;
  { m.summary_dim() } -> std::convertible_to<std::size_t>;
  { m.prior() } -> std::convertible_to<const PriorSpec&>;
  { m.simulate_summary(theta, seed) } -> std::convertible_to<SummaryVector>;
};

// Shared simulation counter. Algorithms report how many simulations they
// spent; wrapping a model lets callers cross-check that report.
class SimCounter {
 public:
  void increment() { count_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

template <SimulatorModel M>
class CountedModel {
 public:
  CountedModel(const M& inner, SimCounter& counter)
      : inner_(&inner), counter_(&counter) {}

  std::size_t param_dim() const { return inner_->param_dim(); }
  std::size_t summary_dim() const { return inner_->summary_dim(); }
  const PriorSpec& prior() const { return inner_->prior(); }

  SummaryVector simulate_summary(const ParamVector& theta,
                                 std::uint64_t seed) const {
    counter_->increment();
    return inner_->simulate_summary(theta, seed);
  }

 private:
  const M* inner_;
  SimCounter* counter_;
};

// Runs one simulation and validates the output: correct dimension, all
// entries finite. Dimension mismatch and non-finite output both surface as
// SimulationError; callers decide whether to retry.
template <SimulatorModel M>
SummaryVector simulate_checked(const M& model, const ParamVector& theta,
                               std::uint64_t seed) {
  SummaryVector s = model.simulate_summary(theta, seed);
  if (s.size() != model.summary_dim())
    throw SimulationError("simulator returned summary of dimension " +
                          std::to_string(s.size()) + ", expected " +
                          std::to_string(model.summary_dim()));
  for (double v : s)
    if (!std::isfinite(v))
      throw SimulationError("simulator returned non-finite summary entry");
  return s;
}

// Retry wrapper for algorithms that need a usable summary at a fixed theta
// (synthetic likelihood, neural training data). Each attempt uses a fresh
// seed from the slot's namespace, so retries stay reproducible.
template <SimulatorModel M>
SummaryVector simulate_with_retry(const M& model, const ParamVector& theta,
                                  const SeedStream& slot_seeds,
                                  int max_retries = 8) {
  for (int attempt = 0;; ++attempt) {
    try {
      return simulate_checked(model, theta, slot_seeds.derive(attempt));
    } catch (const SimulationError&) {
      if (attempt >= max_retries) throw;
    }
  }
}

}  // namespace sbikit
