#pragma once

// Neural posterior estimation. A posterior-direction estimator conditioned
// on the observed summary is itself the posterior approximation; sampling it
// only needs prior-support rejection, whose rejected fraction is the leakage
// diagnostic. The sequential variant re-proposes each round from the prior
// truncated to the high-density region of the current approximation and
// retrains on everything simulated so far with the plain maximum-likelihood
// loss (truncation instead of importance reweighting keeps the loss valid).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/neural/mdn.hpp"
#include "sbikit/neural/train.hpp"

namespace sbikit {

struct NpeSamples {
  std::vector<ParamVector> draws;
  double leakage = 0.0;  // rejected / (rejected + accepted)
  std::uint64_t n_rejected = 0;
};

// M draws from the learned posterior at the observed summary, rejecting mass
// outside the prior support. Fails once the running rejected fraction shows
// the estimator leaked essentially all its mass out of the support.
inline NpeSamples npe_sample(const CondDensityEstimator& estimator,
                             const PriorSpec& prior,
                             const SummaryVector& observed_summary,
                             std::size_t m_draws, std::uint64_t seed) {
  if (estimator.direction() != CondDirection::posterior)
    throw DomainError("npe_sample: estimator must model the posterior");
  if (estimator.out_dim() != prior.dim())
    throw DimensionError("npe_sample: estimator output does not match prior");
  if (m_draws < 1) throw ConfigError("npe_sample: m_draws must be positive");

  Rng rng = SeedStream(seed).stream(0);
  NpeSamples result;
  result.draws.reserve(m_draws);
  std::uint64_t proposed = 0;
  while (result.draws.size() < m_draws) {
    const ParamVector draw = estimator.sample(observed_summary, rng);
    ++proposed;
    if (prior.in_support(draw)) {
      result.draws.push_back(draw);
    } else {
      ++result.n_rejected;
    }
    if (proposed >= 10000 &&
        static_cast<double>(result.n_rejected) >
            0.99 * static_cast<double>(proposed))
      throw LeakageError(
          "npe_sample: more than 99% of posterior mass lies outside the "
          "prior support");
  }
  result.leakage = static_cast<double>(result.n_rejected) /
                   static_cast<double>(result.n_rejected + m_draws);
  return result;
}

struct TsnpeRoundResult {
  std::vector<TrainingPair> pairs;   // accumulated set including this round
  CondDensityEstimator estimator;    // retrained on the accumulated set
  double threshold_log_density = 0.0;
  double retained_fraction = 0.0;    // prior draws at or above the threshold
  TrainingReport report;
};

namespace detail {

// Truncation threshold: the low quantile of the current approximation's
// density over prior draws. Everything at or above it stays proposable.
template <class Prior>
double tsnpe_threshold(const CondDensityEstimator& estimator,
                       const Prior& prior,
                       const SummaryVector& observed_summary, Rng& rng,
                       std::size_t n_eval, double quantile_level,
                       double* retained_fraction) {
  std::vector<double> log_densities;
  log_densities.reserve(n_eval);
  for (std::size_t i = 0; i < n_eval; ++i) {
    const ParamVector theta = prior.sample(rng);
    const double lq = estimator.log_density(observed_summary, theta);
    if (std::isnan(lq))
      throw DomainError("tsnpe: estimator density evaluated to NaN");
    log_densities.push_back(lq);
  }
  const double threshold = quantile(log_densities, quantile_level);
  std::size_t kept = 0;
  for (double lq : log_densities)
    if (lq >= threshold) ++kept;
  if (kept == 0)
    throw DomainError("tsnpe: truncated region is empty");
  if (retained_fraction)
    *retained_fraction =
        static_cast<double>(kept) / static_cast<double>(n_eval);
  return threshold;
}

}  // namespace detail

// One truncated round: compute the threshold from prior draws, rejection-
// sample proposals from the truncated prior, simulate at them, and retrain
// on the extended pair set.
template <SimulatorModel M>
TsnpeRoundResult tsnpe_round(const CondDensityEstimator& previous,
                             const M& model,
                             const SummaryVector& observed_summary,
                             std::vector<TrainingPair> pairs,
                             const TrainingConfig& config,
                             const SeedStream& seeds,
                             std::size_t n_threshold_draws = 10000,
                             double truncation_quantile = 1e-3) {
  if (previous.direction() != CondDirection::posterior)
    throw DomainError("tsnpe_round: estimator must model the posterior");
  const auto& prior = model.prior();
  if (previous.out_dim() != prior.dim() ||
      previous.cond_dim() != model.summary_dim())
    throw DimensionError("tsnpe_round: estimator does not match the model");

  TsnpeRoundResult result;
  Rng threshold_rng = seeds.stream(0);
  result.threshold_log_density = detail::tsnpe_threshold(
      previous, prior, observed_summary, threshold_rng, n_threshold_draws,
      truncation_quantile, &result.retained_fraction);

  // Proposals from the truncated prior. The threshold is a low quantile of
  // the prior-draw densities, so acceptance stays near one by construction;
  // the attempt bound only guards against a broken density.
  Rng proposal_rng = seeds.stream(1);
  std::vector<ParamVector> proposals;
  proposals.reserve(config.sims_per_round);
  std::uint64_t consecutive_rejects = 0;
  while (proposals.size() < config.sims_per_round) {
    const ParamVector theta = prior.sample(proposal_rng);
    if (previous.log_density(observed_summary, theta) >=
        result.threshold_log_density) {
      proposals.push_back(theta);
      consecutive_rejects = 0;
    } else if (++consecutive_rejects > 1000000) {
      throw DomainError(
          "tsnpe_round: truncated region unreachable by prior sampling");
    }
  }

  const SeedStream sim_seeds = seeds.sub(2);
  std::vector<TrainingPair> fresh(config.sims_per_round);
  parallel_for(config.sims_per_round, config.threads, [&](std::size_t i) {
    fresh[i].theta = proposals[i];
    fresh[i].summary =
        simulate_with_retry(model, proposals[i], sim_seeds.sub(i));
  });

  result.pairs = std::move(pairs);
  result.pairs.insert(result.pairs.end(),
                      std::make_move_iterator(fresh.begin()),
                      std::make_move_iterator(fresh.end()));
  result.estimator = train_cnde(result.pairs, CondDirection::posterior,
                                config, &result.report);
  return result;
}

struct TsnpeRoundInfo {
  std::size_t round = 0;
  std::size_t n_pairs = 0;
  double threshold_log_density = 0.0;
  double retained_fraction = 0.0;
  double best_val_loss = 0.0;
};

struct TsnpeResult {
  CondDensityEstimator estimator;
  std::vector<TrainingPair> pairs;
  std::vector<TsnpeRoundInfo> rounds;
};

// Full truncated sequential run: round 1 trains on prior simulations, later
// rounds on truncated proposals. Per-round training seeds derive from the
// top-level seed so the whole run is reproducible.
template <SimulatorModel M>
TsnpeResult run_tsnpe(const M& model, const SummaryVector& observed_summary,
                      const TrainingConfig& config) {
  config.validate();
  const SeedStream root(config.seed);

  TsnpeResult result;
  TrainingConfig round_config = config;
  round_config.seed = root.derive(1);
  result.pairs = simulate_training_pairs(model, config.sims_per_round,
                                         root.sub(0), config.threads);
  TrainingReport report;
  result.estimator = train_cnde(result.pairs, CondDirection::posterior,
                                round_config, &report);
  result.rounds.push_back({1, result.pairs.size(), 0.0, 1.0,
                           report.best_val_loss});

  for (std::size_t round = 2; round <= config.rounds; ++round) {
    round_config.seed = root.derive(round);
    TsnpeRoundResult step =
        tsnpe_round(result.estimator, model, observed_summary,
                    std::move(result.pairs), round_config, root.sub(round));
    result.pairs = std::move(step.pairs);
    result.estimator = std::move(step.estimator);
    result.rounds.push_back({round, result.pairs.size(),
                             step.threshold_log_density,
                             step.retained_fraction,
                             step.report.best_val_loss});
  }
  return result;
}

}  // namespace sbikit
