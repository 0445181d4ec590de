#pragma once

// Neural likelihood estimation. A likelihood-direction estimator evaluated
// at the observed summary gives a tractable stand-in for the intractable
// likelihood; random-walk Metropolis in the unconstrained parameter space
// then targets its product with the prior. The robust variant augments the
// target with per-summary adjustment parameters that shift the observed
// summary on its standardized scale, with a sparsifying Laplace prior, so
// summaries the model cannot reproduce are absorbed by the adjustment and
// flagged instead of corrupting the fit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/linalg.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/slice.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/core/transform.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/io/csv.hpp"
#include "sbikit/neural/mdn.hpp"
#include "sbikit/neural/train.hpp"

namespace sbikit {

struct NleConfig {
  std::size_t n_iter = 10000;
  Eigen::MatrixXd proposal_cov;  // random-walk covariance, unconstrained space
  ParamVector theta_init;        // empty means the prior mean
  double tau = 0.3;              // adjustment prior scale per unit of summary
  double lambda_floor = 0.01;    // lower bound on the adjustment prior scale
  double slice_width = 1.0;      // slice sampler step for adjustment updates
  bool gamma_fixed_zero = false; // freeze adjustments; robust run becomes plain
  std::uint64_t seed = 1;
  // Testing hook: replaces the learned density q(summary | theta).
  std::function<double(const ParamVector&, const SummaryVector&)>
      loglik_override;

  void validate(std::size_t param_dim) const {
    std::vector<std::string> problems;
    if (n_iter < 1) problems.push_back("n_iter must be positive");
    if (proposal_cov.rows() != static_cast<Eigen::Index>(param_dim) ||
        proposal_cov.cols() != static_cast<Eigen::Index>(param_dim))
      problems.push_back("proposal_cov must be square with parameter size");
    if (!theta_init.empty() && theta_init.size() != param_dim)
      problems.push_back("theta_init dimension mismatch");
    if (!(tau > 0.0)) problems.push_back("tau must be positive");
    if (!(lambda_floor > 0.0))
      problems.push_back("lambda_floor must be positive");
    if (!(slice_width > 0.0))
      problems.push_back("slice_width must be positive");
    if (!problems.empty()) throw ConfigError(problems);
  }
};

struct NleSample {
  ParamVector theta;
  double loglik = 0.0;  // learned log q(observed | theta)
  bool accepted = false;
};

struct NleResult {
  std::vector<NleSample> chain;
  double acceptance_rate = 0.0;
};

struct RsnlSample {
  ParamVector theta;
  std::vector<double> gamma;  // standardized-scale summary adjustments
  double loglik = 0.0;        // learned log q(adjusted observed | theta)
  bool accepted = false;      // theta move only
};

struct RsnlResult {
  std::vector<RsnlSample> chain;
  std::vector<double> lambdas;  // adjustment prior scales, per summary
  double acceptance_rate = 0.0;
};

namespace detail {

inline void check_likelihood_estimator(const CondDensityEstimator& estimator,
                                       const PriorSpec& prior,
                                       const SummaryVector& observed_summary) {
  if (estimator.direction() != CondDirection::likelihood)
    throw DomainError("nle: estimator must model the likelihood");
  if (estimator.cond_dim() != prior.dim())
    throw DimensionError("nle: estimator conditioner does not match prior");
  if (estimator.out_dim() != observed_summary.size())
    throw DimensionError("nle: observed summary dimension mismatch");
  for (double v : observed_summary)
    if (!std::isfinite(v))
      throw DomainError("nle: observed summary must be finite");
}

inline ParamVector nle_initial_theta(const PriorSpec& prior,
                                     const NleConfig& config) {
  ParamVector theta =
      config.theta_init.empty() ? prior.mean() : config.theta_init;
  if (!prior.in_support(theta))
    throw DomainError("nle: initial point outside the prior support");
  return theta;
}

}  // namespace detail

// Random-walk Metropolis on the learned posterior q(observed | theta) p(theta),
// run in the unconstrained space so uniform bounds never truncate proposals.
inline NleResult nle_posterior_sample(const CondDensityEstimator& estimator,
                                      const PriorSpec& prior,
                                      const SummaryVector& observed_summary,
                                      const NleConfig& config) {
  detail::check_likelihood_estimator(estimator, prior, observed_summary);
  config.validate(prior.dim());
  const auto loglik = [&](const ParamVector& theta) {
    return config.loglik_override
               ? config.loglik_override(theta, observed_summary)
               : estimator.log_density(theta, observed_summary);
  };

  const BoundTransform transform = BoundTransform::for_prior(prior);
  const std::size_t d = prior.dim();
  const Eigen::MatrixXd chol = detail::psd_factor(config.proposal_cov);

  ParamVector theta = detail::nle_initial_theta(prior, config);
  std::vector<double> phi = transform.forward(theta).value;
  double current_ll = loglik(theta);
  double current_target =
      log_prior_transformed(prior, transform, phi) + current_ll;
  if (!std::isfinite(current_target))
    throw DomainError("nle: target not finite at the initial point");

  Rng rng = SeedStream(config.seed).stream(0);
  NleResult result;
  result.chain.reserve(config.n_iter);
  std::size_t n_accept = 0;
  Eigen::VectorXd z(d);
  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    const Eigen::VectorXd step = chol * z;
    std::vector<double> phi_prop = phi;
    for (std::size_t j = 0; j < d; ++j) phi_prop[j] += step[j];

    const double lp_prop = log_prior_transformed(prior, transform, phi_prop);
    bool accepted = false;
    if (std::isfinite(lp_prop)) {
      const ParamVector theta_prop = transform.inverse(phi_prop);
      const double ll_prop = loglik(theta_prop);
      const double target_prop = lp_prop + ll_prop;
      if (std::isfinite(target_prop) &&
          std::log(1.0 - rng.uniform()) < target_prop - current_target) {
        phi = std::move(phi_prop);
        theta = theta_prop;
        current_ll = ll_prop;
        current_target = target_prop;
        accepted = true;
        ++n_accept;
      } else if (!std::isfinite(target_prop)) {
        rng.uniform();  // keep the draw count independent of rejection cause
      }
    } else {
      rng.uniform();
    }
    result.chain.push_back({theta, current_ll, accepted});
  }
  result.acceptance_rate =
      static_cast<double>(n_accept) / static_cast<double>(config.n_iter);
  return result;
}

// Robust variant: Metropolis-within-Gibbs over (theta, gamma). Gamma lives on
// the standardized summary scale; its prior scale per summary is tau times
// the magnitude of the standardized observed value, floored so an observed
// value of zero still allows adjustment.
inline RsnlResult rsnl_posterior_sample(const CondDensityEstimator& estimator,
                                        const PriorSpec& prior,
                                        const SummaryVector& observed_summary,
                                        const NleConfig& config) {
  detail::check_likelihood_estimator(estimator, prior, observed_summary);
  config.validate(prior.dim());
  const std::size_t d = prior.dim();
  const std::size_t d_sum = observed_summary.size();

  RsnlResult result;
  result.lambdas.resize(d_sum);
  const Eigen::VectorXd obs_std = estimator.standardize_out(observed_summary);
  for (std::size_t i = 0; i < d_sum; ++i)
    result.lambdas[i] =
        std::max(config.tau * std::abs(obs_std[static_cast<Eigen::Index>(i)]),
                 config.lambda_floor);

  const auto adjusted_observed = [&](const std::vector<double>& gamma) {
    SummaryVector out = observed_summary;
    for (std::size_t i = 0; i < d_sum; ++i)
      out[i] -= gamma[i] * estimator.out_sd()[static_cast<Eigen::Index>(i)];
    return out;
  };
  const auto loglik = [&](const ParamVector& th, const SummaryVector& summ) {
    return config.loglik_override ? config.loglik_override(th, summ)
                                  : estimator.log_density(th, summ);
  };
  const auto log_gamma_prior = [&](const std::vector<double>& gamma) {
    double lp = 0.0;
    for (std::size_t i = 0; i < d_sum; ++i)
      lp += -std::log(2.0 * result.lambdas[i]) -
            std::abs(gamma[i]) / result.lambdas[i];
    return lp;
  };

  const BoundTransform transform = BoundTransform::for_prior(prior);
  const Eigen::MatrixXd chol = detail::psd_factor(config.proposal_cov);

  ParamVector theta = detail::nle_initial_theta(prior, config);
  std::vector<double> phi = transform.forward(theta).value;
  std::vector<double> gamma(d_sum, 0.0);
  double current_ll = loglik(theta, adjusted_observed(gamma));
  double current_target = log_prior_transformed(prior, transform, phi) +
                          current_ll + log_gamma_prior(gamma);
  if (!std::isfinite(current_target))
    throw DomainError("rsnl: target not finite at the initial point");

  Rng rng = SeedStream(config.seed).stream(0);
  result.chain.reserve(config.n_iter);
  std::size_t n_accept = 0;
  Eigen::VectorXd z(d);
  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    // Theta block, random-walk Metropolis at the current adjustment.
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    const Eigen::VectorXd step = chol * z;
    std::vector<double> phi_prop = phi;
    for (std::size_t j = 0; j < d; ++j) phi_prop[j] += step[j];
    const double lp_prop = log_prior_transformed(prior, transform, phi_prop);
    bool accepted = false;
    if (std::isfinite(lp_prop)) {
      const ParamVector theta_prop = transform.inverse(phi_prop);
      const double ll_prop = loglik(theta_prop, adjusted_observed(gamma));
      const double target_prop = lp_prop + ll_prop + log_gamma_prior(gamma);
      if (std::isfinite(target_prop) &&
          std::log(1.0 - rng.uniform()) < target_prop - current_target) {
        phi = std::move(phi_prop);
        theta = theta_prop;
        current_ll = ll_prop;
        current_target = target_prop;
        accepted = true;
        ++n_accept;
      } else if (!std::isfinite(target_prop)) {
        rng.uniform();
      }
    } else {
      rng.uniform();
    }

    // Adjustment block, one univariate slice update per summary.
    if (!config.gamma_fixed_zero) {
      for (std::size_t i = 0; i < d_sum; ++i) {
        const auto log_f = [&](double g) {
          std::vector<double> cand = gamma;
          cand[i] = g;
          const double ll = loglik(theta, adjusted_observed(cand));
          if (!std::isfinite(ll))
            return -std::numeric_limits<double>::infinity();
          return ll - std::abs(g) / result.lambdas[i];
        };
        gamma[i] =
            slice_sample(log_f, gamma[i], config.slice_width, rng);
      }
      current_ll = loglik(theta, adjusted_observed(gamma));
      current_target = log_prior_transformed(prior, transform, phi) +
                       current_ll + log_gamma_prior(gamma);
    }
    result.chain.push_back({theta, gamma, current_ll, accepted});
  }
  result.acceptance_rate =
      static_cast<double>(n_accept) / static_cast<double>(config.n_iter);
  return result;
}

inline CsvTable nle_chain_table(const NleResult& result) {
  CsvTable table;
  table.header.push_back("iter");
  const std::size_t d = result.chain.empty() ? 0 : result.chain[0].theta.size();
  for (std::size_t j = 0; j < d; ++j)
    table.header.push_back("theta_" + std::to_string(j));
  table.header.push_back("loglik");
  table.header.push_back("accepted");
  for (std::size_t i = 0; i < result.chain.size(); ++i) {
    const auto& s = result.chain[i];
    std::vector<double> row;
    row.push_back(static_cast<double>(i + 1));
    row.insert(row.end(), s.theta.begin(), s.theta.end());
    row.push_back(s.loglik);
    row.push_back(s.accepted ? 1.0 : 0.0);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CsvTable rsnl_chain_table(const RsnlResult& result) {
  CsvTable table;
  table.header.push_back("iter");
  const std::size_t d = result.chain.empty() ? 0 : result.chain[0].theta.size();
  const std::size_t d_sum =
      result.chain.empty() ? 0 : result.chain[0].gamma.size();
  for (std::size_t j = 0; j < d; ++j)
    table.header.push_back("theta_" + std::to_string(j));
  for (std::size_t j = 0; j < d_sum; ++j)
    table.header.push_back("gamma_" + std::to_string(j));
  table.header.push_back("loglik");
  table.header.push_back("accepted");
  for (std::size_t i = 0; i < result.chain.size(); ++i) {
    const auto& s = result.chain[i];
    std::vector<double> row;
    row.push_back(static_cast<double>(i + 1));
    row.insert(row.end(), s.theta.begin(), s.theta.end());
    row.insert(row.end(), s.gamma.begin(), s.gamma.end());
    row.push_back(s.loglik);
    row.push_back(s.accepted ? 1.0 : 0.0);
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct SnlRoundInfo {
  std::size_t round = 0;
  std::size_t n_pairs = 0;
  double acceptance_rate = 0.0;
  double best_val_loss = 0.0;
};

struct SnlResult {
  CondDensityEstimator estimator;
  std::vector<TrainingPair> pairs;
  std::vector<NleSample> chain;  // final-round posterior chain
  std::vector<SnlRoundInfo> rounds;
};

namespace detail {

// Scaled sample covariance of the transformed parameters from the most
// recent simulation block. Using only the latest block lets the random walk
// tighten along with the proposals instead of staying at prior width.
inline Eigen::MatrixXd snl_proposal_cov(const std::vector<TrainingPair>& pairs,
                                        std::size_t block,
                                        const BoundTransform& transform) {
  const std::size_t d = transform.dim();
  const std::size_t begin = pairs.size() > block ? pairs.size() - block : 0;
  const std::size_t n = pairs.size() - begin;
  Eigen::MatrixXd rows(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> phi =
        transform.forward(pairs[begin + i].theta).value;
    for (std::size_t j = 0; j < d; ++j)
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          phi[j];
  }
  Eigen::MatrixXd cov = sample_covariance(rows);
  const double scale = 2.38 * 2.38 / static_cast<double>(d);
  cov *= scale;
  cov.diagonal().array() += 1e-9;
  return cov;
}

}  // namespace detail

// Sequential rounds: train the likelihood estimator on everything simulated
// so far, sample the implied posterior, and draw the next round's simulation
// parameters from a thinned tail of that chain.
template <SimulatorModel M>
SnlResult run_snl(const M& model, const SummaryVector& observed_summary,
                  const TrainingConfig& config,
                  std::size_t mcmc_iters_per_round = 2000) {
  config.validate();
  if (mcmc_iters_per_round < 10)
    throw ConfigError("run_snl: mcmc_iters_per_round must be at least 10");
  const auto& prior = model.prior();
  const BoundTransform transform = BoundTransform::for_prior(prior);
  const SeedStream root(config.seed);

  SnlResult result;
  TrainingConfig round_config = config;
  result.pairs = simulate_training_pairs(model, config.sims_per_round,
                                         root.sub(0), config.threads);
  for (std::size_t round = 1; round <= config.rounds; ++round) {
    round_config.seed = root.derive(round);
    TrainingReport report;
    result.estimator = train_cnde(result.pairs, CondDirection::likelihood,
                                  round_config, &report);

    NleConfig mcmc;
    mcmc.n_iter = mcmc_iters_per_round;
    mcmc.proposal_cov = detail::snl_proposal_cov(
        result.pairs, config.sims_per_round, transform);
    mcmc.seed = root.sub(round).derive(0);
    NleResult mcmc_result =
        nle_posterior_sample(result.estimator, prior, observed_summary, mcmc);
    result.rounds.push_back({round, result.pairs.size(),
                             mcmc_result.acceptance_rate,
                             report.best_val_loss});
    if (round == config.rounds) {
      result.chain = std::move(mcmc_result.chain);
      break;
    }

    // Next-round parameters: evenly thinned post-burn states. Repeats are
    // harmless; they just get fresh simulation seeds.
    const std::size_t burn = mcmc_iters_per_round / 5;
    const std::size_t span = mcmc_iters_per_round - burn;
    std::vector<ParamVector> proposals(config.sims_per_round);
    for (std::size_t j = 0; j < config.sims_per_round; ++j) {
      const std::size_t idx =
          burn + (j * span) / config.sims_per_round;
      proposals[j] = mcmc_result.chain[idx].theta;
    }
    const SeedStream sim_seeds = root.sub(round).sub(1);
    std::vector<TrainingPair> fresh(config.sims_per_round);
    parallel_for(config.sims_per_round, config.threads, [&](std::size_t i) {
      fresh[i].theta = proposals[i];
      fresh[i].summary =
          simulate_with_retry(model, proposals[i], sim_seeds.sub(i));
    });
    result.pairs.insert(result.pairs.end(),
                        std::make_move_iterator(fresh.begin()),
                        std::make_move_iterator(fresh.end()));
  }
  return result;
}

}  // namespace sbikit
