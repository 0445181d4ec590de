#pragma once

// MCMC over the synthetic-likelihood posterior. The theta block is a
// random-walk Metropolis step whose acceptance ratio compares a fresh
// estimate at the proposal against the stored estimate at the current point
// (pseudo-marginal discipline: the current estimate is never refreshed unless
// explicitly asked for, which would target a slightly different posterior).
// The robust variants carry an adjustment vector Gamma with a component-wise
// Laplace prior, updated by slice sampling within Gibbs; Gamma moves reuse
// the stored moment estimate and cost no simulations.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sbikit/bsl/synthetic_likelihood.hpp"
#include "sbikit/core/errors.hpp"
#include "sbikit/core/linalg.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/slice.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

struct BslConfig {
  std::size_t n_iter = 10000;
  std::size_t m = 100;              // simulations per likelihood estimate
  Eigen::MatrixXd proposal_cov;     // d_theta x d_theta, positive definite
  double gamma_prior_scale = 0.5;   // Laplace scale for each gamma component
  double slice_width = 1.0;         // initial bracket width for gamma updates
  // Refresh the estimate at the current point after a rejection. Breaks the
  // pseudo-marginal argument, so it defaults off; exposed for experiments.
  bool re_estimate_current = false;
  ParamVector theta_init;           // empty: start from the prior mean
  std::size_t max_estimate_attempts = 4;  // fresh batches before giving up
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    std::string problems;
    auto add = [&](const std::string& p) {
      if (!problems.empty()) problems += "; ";
      problems += p;
    };
    if (n_iter < 1) add("n_iter must be at least 1");
    if (m < 1) add("m must be at least 1");
    if (proposal_cov.rows() == 0 ||
        proposal_cov.rows() != proposal_cov.cols())
      add("proposal_cov must be a non-empty square matrix");
    if (!(gamma_prior_scale > 0.0))
      add("gamma_prior_scale must be positive");
    if (!(slice_width > 0.0)) add("slice_width must be positive");
    if (max_estimate_attempts < 1)
      add("max_estimate_attempts must be at least 1");
    if (!problems.empty()) throw ConfigError("bsl config: " + problems);
  }
};

struct BslSample {
  ParamVector theta;
  std::vector<double> gamma;  // zero vector when robust = none
  double loglik = 0.0;        // adjusted log synthetic likelihood at (theta, gamma)
  bool accepted = false;      // outcome of this iteration's theta block
};

struct BslResult {
  std::vector<BslSample> chain;
  double acceptance_rate = 0.0;   // theta block only
  // Times the mean adjustment clamped a negative sample variance at zero.
  std::size_t mean_clamp_events = 0;
};

namespace detail {

// Fresh synthetic-likelihood estimate with a bounded number of fresh-seed
// batches when the sample covariance comes out singular.
template <SimulatorModel M>
SyntheticLikelihoodEstimate estimate_with_attempts(
    const M& model, const ParamVector& theta, std::size_t m,
    const SummaryVector& observed, const SeedStream& seeds,
    std::size_t max_attempts, unsigned threads) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return estimate_synthetic_loglik(model, theta, m, observed,
                                       seeds.sub(attempt), threads);
    } catch (const SingularCovarianceError&) {
      if (attempt + 1 >= max_attempts)
        throw SingularCovarianceError(
            "bsl mcmc: covariance singular across " +
            std::to_string(max_attempts) + " estimation attempts");
    }
  }
}

}  // namespace detail

// Samples the synthetic-likelihood posterior. robust selects the stationary
// target: the plain Gaussian fit, the mean-adjusted fit, or the
// variance-inflated fit; Gamma stays pinned at zero for the plain target.
template <SimulatorModel M>
BslResult run_bsl_mcmc(const M& model, const SummaryVector& observed_summary,
                       const BslConfig& config,
                       BslAdjustment robust = BslAdjustment::none) {
  config.validate();
  const std::size_t d_theta = model.param_dim();
  const std::size_t d = model.summary_dim();
  if (observed_summary.size() != d)
    throw DimensionError("bsl mcmc: observed summary dimension mismatch");
  if (config.m < d + 2)
    throw DomainError("bsl mcmc: need m >= d + 2, got m = " +
                      std::to_string(config.m));
  if (static_cast<std::size_t>(config.proposal_cov.rows()) != d_theta)
    throw DimensionError("bsl mcmc: proposal covariance dimension mismatch");
  const Eigen::MatrixXd proposal_factor =
      sbikit::detail::psd_factor(config.proposal_cov);

  const auto& prior = model.prior();
  ParamVector theta =
      config.theta_init.empty() ? prior.mean() : config.theta_init;
  if (theta.size() != d_theta)
    throw DimensionError("bsl mcmc: initial parameter dimension mismatch");
  if (!prior.in_support(theta))
    throw DomainError("bsl mcmc: initial parameter outside prior support");

  std::vector<double> gamma(d, 0.0);
  const bool robust_on = robust != BslAdjustment::none;
  const double laplace_scale = config.gamma_prior_scale;

  const SeedStream root(config.seed);
  SyntheticLikelihoodEstimate current = detail::estimate_with_attempts(
      model, theta, config.m, observed_summary, root.sub(0),
      config.max_estimate_attempts, config.threads);
  double current_loglik =
      adjusted_synthetic_loglik(current, observed_summary, robust, gamma);
  if (!std::isfinite(current_loglik))
    throw DomainError("bsl mcmc: non-finite log-likelihood at initial point");
  double current_log_prior = prior.log_density(theta);

  BslResult result;
  result.chain.reserve(config.n_iter);
  std::size_t n_accepted = 0;

  for (std::size_t iter = 1; iter <= config.n_iter; ++iter) {
    const SeedStream iter_seeds = root.sub(iter);
    Rng rng = iter_seeds.stream(0);

    // Theta block. An out-of-support proposal rejects on the prior alone and
    // costs no simulations.
    Eigen::VectorXd z(static_cast<Eigen::Index>(d_theta));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd step = proposal_factor * z;
    ParamVector proposal(d_theta);
    for (std::size_t i = 0; i < d_theta; ++i)
      proposal[i] = theta[i] + step[static_cast<Eigen::Index>(i)];

    bool accepted = false;
    if (prior.in_support(proposal)) {
      const SyntheticLikelihoodEstimate cand = detail::estimate_with_attempts(
          model, proposal, config.m, observed_summary, iter_seeds.sub(1),
          config.max_estimate_attempts, config.threads);
      const double cand_loglik =
          adjusted_synthetic_loglik(cand, observed_summary, robust, gamma);
      const double cand_log_prior = prior.log_density(proposal);
      const double log_ratio =
          cand_log_prior + cand_loglik - current_log_prior - current_loglik;
      if (std::log(rng.uniform()) < log_ratio) {
        theta = proposal;
        current = cand;
        current_loglik = cand_loglik;
        current_log_prior = cand_log_prior;
        accepted = true;
      }
    }
    if (!accepted && config.re_estimate_current) {
      current = detail::estimate_with_attempts(
          model, theta, config.m, observed_summary, iter_seeds.sub(2),
          config.max_estimate_attempts, config.threads);
      current_loglik = adjusted_synthetic_loglik(current, observed_summary,
                                                 robust, gamma);
    }
    if (accepted) ++n_accepted;

    // Gamma block: component-wise slice updates against the stored estimate.
    if (robust_on) {
      for (std::size_t i = 0; i < d; ++i) {
        const auto log_target = [&](double g) {
          std::vector<double> trial = gamma;
          trial[i] = g;
          double ll;
          try {
            ll = adjusted_synthetic_loglik(current, observed_summary, robust,
                                           trial);
          } catch (const SingularCovarianceError&) {
            return -std::numeric_limits<double>::infinity();
          }
          return ll - std::abs(g) / laplace_scale;
        };
        gamma[i] =
            slice_sample(log_target, gamma[i], config.slice_width, rng);
      }
      bool clamped = false;
      if (robust == BslAdjustment::mean_adjust) {
        mean_adjusted_mean(current.mu_hat, current.sigma_hat, gamma,
                           &clamped);
        if (clamped) ++result.mean_clamp_events;
      }
      current_loglik = adjusted_synthetic_loglik(current, observed_summary,
                                                 robust, gamma);
    }

    BslSample sample;
    sample.theta = theta;
    sample.gamma = gamma;
    sample.loglik = current_loglik;
    sample.accepted = accepted;
    result.chain.push_back(std::move(sample));
  }

  result.acceptance_rate =
      static_cast<double>(n_accepted) / static_cast<double>(config.n_iter);
  return result;
}

inline CsvTable bsl_chain_table(const BslResult& result) {
  CsvTable table;
  table.header = {"iter"};
  if (!result.chain.empty()) {
    for (std::size_t i = 0; i < result.chain.front().theta.size(); ++i)
      table.header.push_back("theta_" + std::to_string(i));
    for (std::size_t i = 0; i < result.chain.front().gamma.size(); ++i)
      table.header.push_back("gamma_" + std::to_string(i));
  }
  table.header.push_back("loglik");
  table.header.push_back("accepted");
  for (std::size_t row = 0; row < result.chain.size(); ++row) {
    const BslSample& s = result.chain[row];
    std::vector<double> cells;
    cells.push_back(static_cast<double>(row + 1));
    for (double v : s.theta) cells.push_back(v);
    for (double v : s.gamma) cells.push_back(v);
    cells.push_back(s.loglik);
    cells.push_back(s.accepted ? 1.0 : 0.0);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace sbikit
