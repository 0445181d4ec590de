#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sbikit {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions between caller and callee.
struct DimensionError : Error {
  using Error::Error;
};

// Argument outside its admissible range (negative scale, bound order, ...).
struct DomainError : Error {
  using Error::Error;
};

// Simulator produced something unusable: NaN/inf summaries, or a model-level
// degenerate outcome (e.g. an empty cell population) after retries ran out.
struct SimulationError : Error {
  using Error::Error;
};

// Covariance estimate not positive definite even after regularisation.
struct SingularCovarianceError : Error {
  using Error::Error;
};

// Simulation budget too small to complete the requested stage.
struct BudgetError : Error {
  using Error::Error;
};

// Malformed or inconsistent run configuration. Carries every problem found,
// not just the first.
struct ConfigError : Error {
  std::vector<std::string> problems;
  explicit ConfigError(std::vector<std::string> probs)
      : Error(join(probs)), problems(std::move(probs)) {}
  explicit ConfigError(const std::string& single)
      : ConfigError(std::vector<std::string>{single}) {}

 private:
  static std::string join(const std::vector<std::string>& probs) {
    std::string out = "invalid configuration:";
    for (const auto& p : probs) {
      out += "\n  - ";
      out += p;
    }
    return out;
  }
};

// External simulator subprocess failed, timed out, or wrote garbage.
struct SubprocessError : SimulationError {
  using SimulationError::SimulationError;
};

// A summary statistic is undefined for this realisation (e.g. a quantile of
// an empty group). Treated as a simulator failure by inference layers.
struct DegenerateSummaryError : SimulationError {
  using SimulationError::SimulationError;
};

// Training data problems or non-finite loss during density estimator fitting.
struct TrainingError : Error {
  using Error::Error;
};

// Posterior estimator leaks essentially all mass outside the prior support.
struct LeakageError : Error {
  using Error::Error;
};

}  // namespace sbikit
