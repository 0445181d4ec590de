#pragma once

// Adaptive SMC ABC with a discard-and-refresh threshold schedule.
//
// Each iteration sorts the population by discrepancy, keeps the best
// ceil((1-a) N) particles, sets the next threshold to the worst kept rho, and
// rebuilds the discarded slots by resampling survivors uniformly and moving
// them through R_t steps of an MCMC ABC kernel. R_t adapts to the previous
// acceptance rate so that a stuck particle is moved at least once with
// probability about 1 - c. The run stops at an acceptance floor, a target
// threshold, an exhausted simulation budget, or a stagnant threshold.
//
// The move kernel proposes a Gaussian random-walk step in transformed
// (unbounded) space and simulates at every proposal, accepted or not. That
// convention makes the budget ledger exact: total simulations = N initial
// draws + one per proposal, cross-checkable against a SimCounter.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbikit/core/distance.hpp"
#include "sbikit/core/errors.hpp"
#include "sbikit/core/linalg.hpp"
#include "sbikit/core/parallel.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/transform.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

// Invariant: rho == discrepancy(observed, sim_summary) under the run's
// metric, except for failed simulations, which carry rho = +inf and an empty
// summary until the refresh step replaces them.
struct Particle {
  ParamVector theta;
  SummaryVector sim_summary;
  double rho = std::numeric_limits<double>::infinity();
};

using ParticlePopulation = std::vector<Particle>;

struct SmcConfig {
  std::size_t n_particles = 1000;  // N >= 2
  double discard_fraction = 0.5;   // a in (0,1)
  double mcmc_c = 0.01;            // c in (0,1), tunes R_t
  std::optional<double> epsilon_target;
  double min_acceptance = 0.01;
  std::uint64_t max_total_simulations = 100'000'000;
  int r_t_cap = 500;
  double stagnation_rel_tol = 1e-12;
  // A proposal whose simulation fails is rejected and counted; this bounds
  // how many times in a row one move chain may do that before erroring out.
  int max_consecutive_failures = 25;
  SummaryMetric metric = SummaryMetric::euclidean;
  std::vector<double> metric_scales;  // required iff metric is scaled
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    std::vector<std::string> problems;
    if (n_particles < 2) problems.push_back("n_particles must be >= 2");
    if (!(discard_fraction > 0.0) || !(discard_fraction < 1.0))
      problems.push_back("discard_fraction must lie in (0,1)");
    if (!(mcmc_c > 0.0) || !(mcmc_c < 1.0))
      problems.push_back("mcmc_c must lie in (0,1)");
    if (!(min_acceptance >= 0.0) || !(min_acceptance < 1.0))
      problems.push_back("min_acceptance must lie in [0,1)");
    if (max_total_simulations == 0)
      problems.push_back("max_total_simulations must be positive");
    if (r_t_cap < 1) problems.push_back("r_t_cap must be >= 1");
    if (!(stagnation_rel_tol >= 0.0))
      problems.push_back("stagnation_rel_tol must be >= 0");
    if (max_consecutive_failures < 1)
      problems.push_back("max_consecutive_failures must be >= 1");
    if (epsilon_target &&
        (!(*epsilon_target >= 0.0) || !std::isfinite(*epsilon_target)))
      problems.push_back("epsilon_target must be finite and >= 0");
    if (metric == SummaryMetric::scaled_euclidean && metric_scales.empty())
      problems.push_back("scaled metric requires metric_scales");
    if (!problems.empty()) {
      std::string joined = "smc config: ";
      for (std::size_t i = 0; i < problems.size(); ++i) {
        if (i) joined += "; ";
        joined += problems[i];
      }
      throw ConfigError(joined);
    }
  }
};

struct SmcIterationRecord {
  std::size_t iter;        // 1-based
  double epsilon;
  double p_acc;
  int r_t;
  std::uint64_t cum_sims;  // includes the N initial draws
};

struct SmcTrace {
  std::vector<SmcIterationRecord> records;
};

enum class SmcStopReason : int {
  acceptance_floor = 0,
  target_reached = 1,
  budget_exhausted = 2,
  stagnation = 3,
};

inline const char* stop_reason_name(SmcStopReason r) {
  switch (r) {
    case SmcStopReason::acceptance_floor: return "acceptance_floor";
    case SmcStopReason::target_reached: return "target_reached";
    case SmcStopReason::budget_exhausted: return "budget_exhausted";
    case SmcStopReason::stagnation: return "stagnation";
  }
  return "unknown";
}

struct SmcResult {
  ParticlePopulation particles;
  SmcTrace trace;
  SmcStopReason reason = SmcStopReason::stagnation;
  double final_epsilon = std::numeric_limits<double>::infinity();
  std::uint64_t total_simulations = 0;
};

// Sorts the population by rho ascending (stable, so rho ties keep their
// incoming order) and returns the threshold implied by discarding the a N
// worst particles: epsilon is the rho of the ceil((1-a) N)-th smallest.
// Survivors occupy [0, n_survivors) afterwards. stagnant flags an
// all-equal-rho population, where discarding cannot lower the threshold.
struct ThresholdDecision {
  double epsilon;
  std::size_t n_survivors;
  bool stagnant;
};

inline ThresholdDecision adaptive_threshold(ParticlePopulation& population,
                                            double discard_fraction) {
  if (population.size() < 2)
    throw DomainError("adaptive_threshold: need at least 2 particles");
  if (!(discard_fraction > 0.0) || !(discard_fraction < 1.0))
    throw DomainError("adaptive_threshold: discard fraction must be in (0,1)");
  std::stable_sort(population.begin(), population.end(),
                   [](const Particle& a, const Particle& b) {
                     return a.rho < b.rho;
                   });
  const double n = static_cast<double>(population.size());
  const auto keep =
      static_cast<std::size_t>(std::ceil((1.0 - discard_fraction) * n));
  ThresholdDecision out;
  out.n_survivors = std::max<std::size_t>(keep, 1);
  out.epsilon = population[out.n_survivors - 1].rho;
  out.stagnant = population.front().rho == population.back().rho;
  return out;
}

// R_t = ceil(log(c) / log(1 - p_acc)), the number of MCMC steps after which a
// particle moving with per-step acceptance p_acc stays put with probability at
// most c. Clamped to [1, cap]; p_acc = 0 pins the cap, p_acc = 1 gives 1.
inline int compute_num_mcmc_steps(double p_acc, double c, int cap = 500) {
  if (!(p_acc >= 0.0) || !(p_acc <= 1.0))
    throw DomainError("compute_num_mcmc_steps: p_acc must lie in [0,1]");
  if (!(c > 0.0) || !(c < 1.0))
    throw DomainError("compute_num_mcmc_steps: c must lie in (0,1)");
  if (cap < 1) throw DomainError("compute_num_mcmc_steps: cap must be >= 1");
  if (p_acc <= 0.0) return cap;
  if (p_acc >= 1.0) return 1;
  // The 1e-9 slack keeps ratios that are integers in exact arithmetic (for
  // instance p_acc = 0.99, c = 0.01) from ceiling one step too high.
  const double raw = std::ceil(std::log(c) / std::log1p(-p_acc) - 1e-9);
  if (!(raw >= 1.0)) return 1;
  if (raw >= static_cast<double>(cap)) return cap;
  return static_cast<int>(raw);
}

namespace detail {

// Sample covariance of the survivors' transformed coordinates; zero matrix
// when fewer than two survivors.
inline Eigen::MatrixXd survivor_covariance(const ParticlePopulation& population,
                                           std::size_t n_survivors,
                                           const BoundTransform& transform) {
  const auto d = static_cast<Eigen::Index>(transform.dim());
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n_survivors), d);
  for (std::size_t i = 0; i < n_survivors; ++i) {
    const auto fwd = transform.forward(population[i].theta);
    for (Eigen::Index j = 0; j < d; ++j)
      phi(static_cast<Eigen::Index>(i), j) =
          fwd.value[static_cast<std::size_t>(j)];
  }
  if (n_survivors < 2) return Eigen::MatrixXd::Zero(d, d);
  const Eigen::RowVectorXd mean = phi.colwise().mean();
  phi.rowwise() -= mean;
  return (phi.transpose() * phi) / static_cast<double>(n_survivors - 1);
}

}  // namespace detail

struct MoveStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double p_acc = 0.0;
};

// Rebuilds population slots [n_survivors, N): each is seeded from a uniformly
// resampled survivor and moved through r_t MCMC ABC steps. A step proposes a
// Gaussian random walk in transformed space, simulates at the proposed theta,
// and accepts iff the transformed-prior Metropolis test passes and the fresh
// discrepancy is <= epsilon. Survivor slots are frozen, replaced slots are
// disjoint, and every random draw comes from the slot's own seed stream, so
// the result is identical for any thread count.
template <SimulatorModel M>
MoveStats resample_and_move(ParticlePopulation& population,
                            std::size_t n_survivors, double epsilon,
                            const Eigen::MatrixXd& proposal_cov, int r_t,
                            const M& model, const SummaryVector& observed,
                            const BoundTransform& transform,
                            const SeedStream& seeds, SummaryMetric metric,
                            const std::vector<double>& metric_scales = {},
                            unsigned threads = 1,
                            int max_consecutive_failures = 25) {
  if (n_survivors == 0 || n_survivors > population.size())
    throw DomainError("resample_and_move: invalid survivor count");
  if (r_t < 1) throw DomainError("resample_and_move: r_t must be >= 1");
  const std::size_t n_replace = population.size() - n_survivors;
  MoveStats stats;
  stats.proposals =
      static_cast<std::uint64_t>(n_replace) * static_cast<std::uint64_t>(r_t);
  if (n_replace == 0) return stats;

  const Eigen::MatrixXd factor = detail::psd_factor(proposal_cov);
  const auto d = static_cast<std::size_t>(factor.rows());
  if (d != transform.dim())
    throw DimensionError("resample_and_move: covariance dimension mismatch");
  const PriorSpec& prior = model.prior();
  std::vector<std::uint32_t> accepted(n_replace, 0);

  parallel_for(n_replace, threads, [&](std::size_t slot) {
    const SeedStream slot_seeds = seeds.sub(slot);
    Rng rng = slot_seeds.stream(0);
    Particle current =
        population[rng.uniform_int(static_cast<std::uint64_t>(n_survivors))];
    std::vector<double> phi = transform.forward(current.theta).value;
    double log_prior = log_prior_transformed(prior, transform, phi);

    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    std::vector<double> phi_prop(d);
    int fail_streak = 0;
    for (int step = 0; step < r_t; ++step) {
      // Fixed draw order per step: d normals, then the Metropolis uniform.
      for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
      const Eigen::VectorXd jump = factor * z;
      for (std::size_t j = 0; j < d; ++j)
        phi_prop[j] = phi[j] + jump[static_cast<Eigen::Index>(j)];
      const double log_u = std::log(rng.uniform());

      const ParamVector theta_prop = transform.inverse(phi_prop);
      const double log_prior_prop =
          log_prior_transformed(prior, transform, phi_prop);
      double rho_prop = std::numeric_limits<double>::infinity();
      SummaryVector summary_prop;
      bool sim_ok = false;
      try {
        summary_prop = simulate_checked(
            model, theta_prop,
            slot_seeds.derive(1 + static_cast<std::uint64_t>(step)));
        rho_prop = discrepancy(observed, summary_prop, metric, metric_scales);
        sim_ok = true;
        fail_streak = 0;
      } catch (const SimulationError&) {
        // Rejected below even at epsilon = +inf: a particle always holds a
        // valid simulation.
        if (++fail_streak > max_consecutive_failures) throw;
      }

      if (sim_ok && log_u < log_prior_prop - log_prior && rho_prop <= epsilon) {
        current.theta = theta_prop;
        current.sim_summary = std::move(summary_prop);
        current.rho = rho_prop;
        phi = phi_prop;
        log_prior = log_prior_prop;
        ++accepted[slot];
      }
    }
    population[n_survivors + slot] = std::move(current);
  });

  for (std::uint32_t a : accepted) stats.accepted += a;
  stats.p_acc = static_cast<double>(stats.accepted) /
                static_cast<double>(stats.proposals);
  return stats;
}

namespace detail {

// Prior samples land in the closed box; the logit transform needs the open
// interval. The nudge is one ulp and only fires on exact-bound draws.
inline void nudge_into_open_support(const BoundTransform& transform,
                                    ParamVector& theta) {
  const auto& dims = transform.dims();
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!dims[i].bounded) continue;
    if (theta[i] <= dims[i].lo)
      theta[i] = std::nextafter(dims[i].lo, dims[i].hi);
    if (theta[i] >= dims[i].hi)
      theta[i] = std::nextafter(dims[i].hi, dims[i].lo);
  }
}

}  // namespace detail

// Runs the full adaptive sampler. The returned particles all satisfy
// rho <= final_epsilon; the trace holds one record per completed iteration
// with a strictly decreasing epsilon column and a strictly increasing
// cumulative simulation count. A simulation failure during initialisation
// leaves that particle at rho = +inf, to be discarded by the first threshold;
// a survivor set still containing failures means the simulator is broken and
// raises SimulationError.
template <SimulatorModel M>
SmcResult run_smc_abc(const M& model, const SummaryVector& observed,
                      const SmcConfig& config) {
  config.validate();
  if (observed.size() != model.summary_dim())
    throw DimensionError("run_smc_abc: observed dimension mismatch");
  if (config.metric == SummaryMetric::scaled_euclidean &&
      config.metric_scales.size() != observed.size())
    throw DimensionError("run_smc_abc: metric_scales dimension mismatch");
  const std::size_t n = config.n_particles;
  if (config.max_total_simulations < n)
    throw BudgetError(
        "run_smc_abc: budget cannot cover the initial population");

  const BoundTransform transform = BoundTransform::for_prior(model.prior());
  const SeedStream root{config.seed};

  SmcResult result;
  result.particles.resize(n);
  {
    const SeedStream init_seeds = root.sub(0);
    parallel_for(n, config.threads, [&](std::size_t i) {
      const SeedStream slot = init_seeds.sub(i);
      Rng rng = slot.stream(0);
      Particle p;
      p.theta = model.prior().sample(rng);
      detail::nudge_into_open_support(transform, p.theta);
      try {
        p.sim_summary = simulate_checked(model, p.theta, slot.derive(1));
        p.rho = discrepancy(observed, p.sim_summary, config.metric,
                            config.metric_scales);
      } catch (const SimulationError&) {
        // rho stays +inf; the discard step replaces it.
      }
      result.particles[i] = std::move(p);
    });
  }
  std::uint64_t cum_sims = n;
  double epsilon_now = std::numeric_limits<double>::infinity();
  double p_acc_prev = 0.5;  // first R_t as if half the proposals would accept

  for (std::size_t iter = 1;; ++iter) {
    const ThresholdDecision td =
        adaptive_threshold(result.particles, config.discard_fraction);
    if (!std::isfinite(td.epsilon))
      throw SimulationError(
          "run_smc_abc: simulation failures fill the survivor set");
    if (td.stagnant) {
      result.reason = SmcStopReason::stagnation;
      break;
    }
    if (std::isfinite(epsilon_now) &&
        epsilon_now - td.epsilon <=
            config.stagnation_rel_tol * std::max(1.0, std::fabs(epsilon_now))) {
      result.reason = SmcStopReason::stagnation;
      break;
    }
    const std::size_t n_replace = n - td.n_survivors;
    if (n_replace == 0) {
      // ceil((1-a) N) == N: the schedule cannot discard anything.
      result.reason = SmcStopReason::stagnation;
      break;
    }

    const int r_t =
        compute_num_mcmc_steps(p_acc_prev, config.mcmc_c, config.r_t_cap);
    const std::uint64_t planned = static_cast<std::uint64_t>(n_replace) *
                                  static_cast<std::uint64_t>(r_t);
    if (planned > config.max_total_simulations - cum_sims) {
      if (result.trace.records.empty())
        throw BudgetError(
            "run_smc_abc: budget exhausted before the first iteration "
            "completes");
      result.reason = SmcStopReason::budget_exhausted;
      break;
    }

    const Eigen::MatrixXd proposal_cov =
        2.0 *
        detail::survivor_covariance(result.particles, td.n_survivors, transform);
    const MoveStats stats = resample_and_move(
        result.particles, td.n_survivors, td.epsilon, proposal_cov, r_t, model,
        observed, transform, root.sub(iter), config.metric,
        config.metric_scales, config.threads, config.max_consecutive_failures);
    cum_sims += stats.proposals;
    epsilon_now = td.epsilon;
    p_acc_prev = stats.p_acc;
    result.trace.records.push_back(
        {iter, td.epsilon, stats.p_acc, r_t, cum_sims});

    if (config.epsilon_target && epsilon_now <= *config.epsilon_target) {
      result.reason = SmcStopReason::target_reached;
      break;
    }
    if (stats.p_acc < config.min_acceptance) {
      result.reason = SmcStopReason::acceptance_floor;
      break;
    }
  }

  result.final_epsilon = epsilon_now;
  result.total_simulations = cum_sims;
  return result;
}

inline CsvTable smc_trace_table(const SmcTrace& trace) {
  CsvTable table;
  table.header = {"iter", "epsilon", "p_acc", "R_t", "cum_sims"};
  for (const auto& r : trace.records)
    table.rows.push_back({static_cast<double>(r.iter), r.epsilon, r.p_acc,
                          static_cast<double>(r.r_t),
                          static_cast<double>(r.cum_sims)});
  return table;
}

inline CsvTable smc_population_table(const ParticlePopulation& population) {
  CsvTable table;
  const std::size_t d = population.empty() ? 0 : population.front().theta.size();
  for (std::size_t j = 0; j < d; ++j)
    table.header.push_back("theta_" + std::to_string(j));
  table.header.push_back("rho");
  for (const auto& p : population) {
    std::vector<double> row(p.theta.begin(), p.theta.end());
    row.push_back(p.rho);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace sbikit
