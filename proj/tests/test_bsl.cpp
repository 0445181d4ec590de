#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "sbikit/bsl/mcmc.hpp"
#include "sbikit/bsl/synthetic_likelihood.hpp"
#include "sbikit/bsl/tune_m.hpp"
#include "sbikit/core/linalg.hpp"
#include "sbikit/core/stats.hpp"
#include "test_util.hpp"

using namespace sbikit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class ConstantModel {
 public:
  ConstantModel() : prior_(PriorSpec::uniform_box({-10.0}, {10.0})) {}
  std::size_t param_dim() const { return 1; }
  std::size_t summary_dim() const { return 1; }
  const PriorSpec& prior() const { return prior_; }
  SummaryVector simulate_summary(const ParamVector&, std::uint64_t) const {
    return {3.14};
  }

 private:
  PriorSpec prior_;
};

// d iid standard-normal summary coordinates, independent of theta. The log
// synthetic likelihood at a fixed observed point then has a noise level set
// purely by (d, m, offset of the observed point), which makes it a clean
// rig for the m-tuning rule.
class NormalSummaryModel {
 public:
  explicit NormalSummaryModel(std::size_t d)
      : d_(d), prior_(PriorSpec::uniform_box({-1.0}, {1.0})) {}
  std::size_t param_dim() const { return 1; }
  std::size_t summary_dim() const { return d_; }
  const PriorSpec& prior() const { return prior_; }
  SummaryVector simulate_summary(const ParamVector&, std::uint64_t seed) const {
    Rng rng(seed);
    SummaryVector s(d_);
    for (auto& v : s) v = rng.normal();
    return s;
  }

 private:
  std::size_t d_;
  PriorSpec prior_;
};

// Correlated Gaussian summaries with known moments: s = mu + L z. Used to
// measure the convergence rate of the moment estimators.
class CorrelatedGaussianModel {
 public:
  CorrelatedGaussianModel(Eigen::VectorXd mu, Eigen::MatrixXd chol)
      : mu_(std::move(mu)), chol_(std::move(chol)),
        prior_(PriorSpec::uniform_box({-1.0}, {1.0})) {}
  std::size_t param_dim() const { return 1; }
  std::size_t summary_dim() const { return static_cast<std::size_t>(mu_.size()); }
  const PriorSpec& prior() const { return prior_; }
  SummaryVector simulate_summary(const ParamVector&, std::uint64_t seed) const {
    Rng rng(seed);
    Eigen::VectorXd z(mu_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd s = mu_ + chol_ * z;
    return SummaryVector(s.data(), s.data() + s.size());
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd chol_;
  PriorSpec prior_;
};

// Throws for a quarter of the seed space; simulate_with_retry must absorb it.
class FlakyModel {
 public:
  FlakyModel() : prior_(PriorSpec::uniform_box({-10.0}, {10.0})) {}
  std::size_t param_dim() const { return 1; }
  std::size_t summary_dim() const { return 1; }
  const PriorSpec& prior() const { return prior_; }
  SummaryVector simulate_summary(const ParamVector& theta,
                                 std::uint64_t seed) const {
    if (seed % 4 == 0) throw SimulationError("flaky");
    Rng rng(seed);
    return {theta[0] + rng.normal()};
  }

 private:
  PriorSpec prior_;
};

std::vector<double> column(const BslResult& res, std::size_t burn,
                           int which, std::size_t idx) {
  std::vector<double> out;
  for (std::size_t i = burn; i < res.chain.size(); ++i)
    out.push_back(which == 0 ? res.chain[i].theta[idx]
                             : res.chain[i].gamma[idx]);
  return out;
}

double quant(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return quantile(v, p);
}

}  // namespace

TEST_CASE("synthetic likelihood estimate matches its definition") {
  const testutil::GaussianMeanModel model(2, 50, 1.0);
  const SeedStream seeds(8101);
  const std::size_t m = 7;
  const SummaryVector observed{1.9, 2.1};
  const auto est =
      estimate_synthetic_loglik(model, {2.0}, m, observed, seeds);

  // Recompute the moments directly from the same seed layout.
  std::vector<SummaryVector> draws;
  for (std::size_t i = 0; i < m; ++i)
    draws.push_back(model.simulate_summary({2.0}, seeds.sub(i).derive(0)));
  for (std::size_t j = 0; j < 2; ++j) {
    double mu = 0.0;
    for (const auto& s : draws) mu += s[j];
    mu /= static_cast<double>(m);
    REQUIRE(est.mu_hat[j] == Catch::Approx(mu).epsilon(1e-12));
  }
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k) {
      double cov = 0.0;
      for (const auto& s : draws)
        cov += (s[j] - est.mu_hat[j]) * (s[k] - est.mu_hat[k]);
      cov /= static_cast<double>(m - 1);
      REQUIRE(est.sigma_hat(j, k) == Catch::Approx(cov).margin(1e-14));
    }
  REQUIRE(est.sigma_hat(0, 1) == est.sigma_hat(1, 0));
  REQUIRE(std::isfinite(est.log_density_at_observed));

  // At observed = mu_hat the quadratic form vanishes and only the
  // normalizing constant remains (det taken after the diagonal jitter).
  SummaryVector at_mean(est.mu_hat.begin(), est.mu_hat.end());
  const double ll = gaussian_loglik(at_mean, est.mu_hat, est.sigma_hat);
  Eigen::MatrixXd jittered = est.sigma_hat;
  jittered.diagonal().array() += 1e-10 * est.sigma_hat.trace() / 2.0;
  const double expected = -std::log(2.0 * std::numbers::pi) -
                          0.5 * std::log(jittered.determinant());
  REQUIRE(ll == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("synthetic likelihood estimate rejects degenerate input") {
  const SeedStream seeds(11);
  const ConstantModel constant;
  REQUIRE_THROWS_AS(
      estimate_synthetic_loglik(constant, {0.0}, 10, {3.14}, seeds),
      SingularCovarianceError);

  const testutil::GaussianMeanModel model(2, 50, 1.0);
  // m below d + 2: the sample covariance cannot be trusted to invert.
  REQUIRE_THROWS_AS(
      estimate_synthetic_loglik(model, {2.0}, 3, {1.9, 2.1}, seeds),
      DomainError);
  REQUIRE_THROWS_AS(
      estimate_synthetic_loglik(model, {2.0}, 10, {1.9}, seeds),
      DimensionError);
  REQUIRE_THROWS_AS(gaussian_loglik({1.0}, {1.0, 2.0},
                                    Eigen::MatrixXd::Identity(2, 2)),
                    DimensionError);
}

TEST_CASE("synthetic likelihood tolerates simulator failures via retries") {
  const FlakyModel model;
  const SeedStream seeds(4242);
  const auto est = estimate_synthetic_loglik(model, {1.0}, 200, {1.0}, seeds);
  REQUIRE(std::isfinite(est.log_density_at_observed));
  REQUIRE(est.mu_hat[0] == Catch::Approx(1.0).margin(0.3));
}

TEST_CASE("moment estimators converge at the root-m rate") {
  Eigen::VectorXd mu(4);
  mu << 1.0, -2.0, 0.5, 3.0;
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(4, 4);
  chol << 1.0, 0.0, 0.0, 0.0,
          0.4, 0.9, 0.0, 0.0,
         -0.3, 0.2, 1.2, 0.0,
          0.1, -0.5, 0.3, 0.7;
  const Eigen::MatrixXd sigma = chol * chol.transpose();
  const CorrelatedGaussianModel model(mu, chol);
  const SummaryVector observed{1.0, -2.0, 0.5, 3.0};
  const SeedStream root(6060);

  const std::vector<std::size_t> ms{100, 1000, 10000};
  const std::size_t reps = 30;
  std::vector<double> log_m, log_mu_err, log_sigma_err;
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    double mu_err = 0.0, sigma_err = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto est = estimate_synthetic_loglik(
          model, {0.0}, ms[mi], observed, root.sub(mi).sub(r));
      double e2 = 0.0;
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double d = est.mu_hat[static_cast<std::size_t>(j)] - mu[j];
        e2 += d * d;
      }
      mu_err += std::sqrt(e2);
      sigma_err += (est.sigma_hat - sigma).norm();
    }
    log_m.push_back(std::log(static_cast<double>(ms[mi])));
    log_mu_err.push_back(std::log(mu_err / static_cast<double>(reps)));
    log_sigma_err.push_back(std::log(sigma_err / static_cast<double>(reps)));
  }

  const auto slope = [&](const std::vector<double>& y) {
    const double xb = mean(log_m), yb = mean(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      num += (log_m[i] - xb) * (y[i] - yb);
      den += (log_m[i] - xb) * (log_m[i] - xb);
    }
    return num / den;
  };
  const double mu_slope = slope(log_mu_err);
  const double sigma_slope = slope(log_sigma_err);
  REQUIRE(mu_slope > -0.6);
  REQUIRE(mu_slope < -0.4);
  REQUIRE(sigma_slope > -0.6);
  REQUIRE(sigma_slope < -0.4);
}

TEST_CASE("mean adjustment arithmetic") {
  // Worked example: sd = (2, 3), Gamma = (1, -1).
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 4.0;
  sigma(1, 1) = 9.0;
  const SummaryVector phi = mean_adjusted_mean({1.0, 1.0}, sigma, {1.0, -1.0});
  REQUIRE(phi[0] == 3.0);
  REQUIRE(phi[1] == -2.0);

  // Null adjustment is exact.
  const SummaryVector null_phi =
      mean_adjusted_mean({1.25, -0.5}, sigma, {0.0, 0.0});
  REQUIRE(null_phi[0] == 1.25);
  REQUIRE(null_phi[1] == -0.5);

  // phi - mu equals sd .* Gamma elementwise for random inputs.
  Rng rng(303);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
    SummaryVector mu(3);
    std::vector<double> gamma(3);
    for (int i = 0; i < 3; ++i) {
      s(i, i) = rng.uniform(0.1, 4.0);
      mu[static_cast<std::size_t>(i)] = rng.uniform(-5.0, 5.0);
      gamma[static_cast<std::size_t>(i)] = rng.uniform(-3.0, 3.0);
    }
    const SummaryVector out = mean_adjusted_mean(mu, s, gamma);
    for (std::size_t i = 0; i < 3; ++i) {
      const double want = std::sqrt(s(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(i))) *
                          gamma[i];
      REQUIRE(out[i] - mu[i] == Catch::Approx(want).margin(1e-12));
    }
  }

  // A tiny negative variance clamps to zero and raises the flag.
  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(2, 2);
  neg(0, 0) = -1e-18;
  neg(1, 1) = 1.0;
  bool clamped = false;
  const SummaryVector out =
      mean_adjusted_mean({0.0, 0.0}, neg, {5.0, 1.0}, &clamped);
  REQUIRE(clamped);
  REQUIRE(out[0] == 0.0);
  REQUIRE(out[1] == 1.0);

  REQUIRE_THROWS_AS(mean_adjusted_mean({1.0}, sigma, {1.0, 2.0}),
                    DimensionError);
}

TEST_CASE("variance adjustment arithmetic") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd v = variance_adjusted_cov(eye, {1.0, 2.0});
  REQUIRE(v(0, 0) == 2.0);
  REQUIRE(v(1, 1) == 5.0);
  REQUIRE(v(0, 1) == 0.0);

  Rng rng(909);
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd sigma =
        a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    std::vector<double> gamma(3);
    for (auto& g : gamma) g = rng.uniform(-3.0, 3.0);

    const Eigen::MatrixXd inflated = variance_adjusted_cov(sigma, gamma);
    // Inflation only grows the determinant, is symmetric, touches only the
    // diagonal, and is sign-invariant in Gamma.
    REQUIRE(inflated.determinant() >= sigma.determinant() - 1e-12);
    REQUIRE((inflated - inflated.transpose()).norm() == 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) REQUIRE(inflated(i, j) == sigma(i, j));
    std::vector<double> negated(3);
    for (std::size_t i = 0; i < 3; ++i) negated[i] = -gamma[i];
    const Eigen::MatrixXd mirrored = variance_adjusted_cov(sigma, negated);
    REQUIRE((inflated - mirrored).norm() == 0.0);
  }

  // Null adjustment returns the input exactly.
  const Eigen::MatrixXd same = variance_adjusted_cov(eye, {0.0, 0.0});
  REQUIRE((same - eye).norm() == 0.0);

  REQUIRE_THROWS_AS(variance_adjusted_cov(eye, {1.0}), DimensionError);
}

TEST_CASE("zero adjustment reproduces the plain likelihood bitwise") {
  Rng rng(515);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 3;
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    SyntheticLikelihoodEstimate est;
    est.sigma_hat = a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(3, 3);
    est.mu_hat = {rng.uniform(), rng.uniform(), rng.uniform()};
    SummaryVector observed(d);
    for (auto& v : observed) v = rng.uniform(-2.0, 2.0);

    const std::vector<double> zero(d, 0.0);
    const double plain =
        adjusted_synthetic_loglik(est, observed, BslAdjustment::none, zero);
    REQUIRE(adjusted_synthetic_loglik(est, observed,
                                      BslAdjustment::mean_adjust, zero) ==
            plain);
    REQUIRE(adjusted_synthetic_loglik(est, observed,
                                      BslAdjustment::variance_adjust, zero) ==
            plain);
  }
}

TEST_CASE("m tuning selects the documented operating point") {
  // Standard-normal summaries in 20 dimensions with the observed point
  // offset into the tail: at this noise level m = 100 is too jumpy
  // (std > 2), m = 300 sits inside [1, 2], m = 1000 wastes simulations
  // (std < 1). The rule must pick 300.
  const NormalSummaryModel model(20);
  const SummaryVector observed(20, 1.25);
  const SeedStream seeds(1);
  const auto result =
      tune_m(model, {0.0}, observed, {100, 300, 1000}, 60, seeds);

  REQUIRE(result.selected_m == 300);
  REQUIRE(result.in_range);
  REQUIRE(result.table.size() == 3);
  REQUIRE(result.table[0].std_log_sl > 2.0);
  REQUIRE(result.table[1].std_log_sl >= 1.0);
  REQUIRE(result.table[1].std_log_sl <= 2.0);
  REQUIRE(result.table[2].std_log_sl < 1.0);
  // Noise decreases with m.
  REQUIRE(result.table[0].std_log_sl > result.table[1].std_log_sl);
  REQUIRE(result.table[1].std_log_sl > result.table[2].std_log_sl);

  const CsvTable csv = tune_m_table(result);
  REQUIRE(csv.header == std::vector<std::string>{"m", "std_log_sl"});
  REQUIRE(csv.rows.size() == 3);
  REQUIRE(csv.rows[1][0] == 300.0);
  REQUIRE(csv.rows[1][1] == result.table[1].std_log_sl);
}

TEST_CASE("m tuning falls back to the closest candidate with a warning") {
  // Observed at the model mean: every candidate lands well below the band,
  // so the rule reports the one closest to 1.5 and flags the miss.
  const NormalSummaryModel model(20);
  const SummaryVector observed(20, 0.0);
  const SeedStream seeds(2);
  const auto result =
      tune_m(model, {0.0}, observed, {100, 300}, 40, seeds);

  REQUIRE_FALSE(result.in_range);
  double best_gap = kInf;
  std::size_t best_m = 0;
  for (const auto& row : result.table) {
    REQUIRE(row.std_log_sl < 1.0);
    const double gap = std::abs(row.std_log_sl - 1.5);
    if (gap < best_gap) {
      best_gap = gap;
      best_m = row.m;
    }
  }
  REQUIRE(result.selected_m == best_m);
}

TEST_CASE("m tuning rejects degenerate input") {
  const SeedStream seeds(3);
  const ConstantModel constant;
  REQUIRE_THROWS_AS(
      tune_m(constant, {0.0}, {3.14}, {10, 20}, 10, seeds),
      SingularCovarianceError);

  const NormalSummaryModel model(4);
  const SummaryVector observed(4, 0.0);
  REQUIRE_THROWS_AS(tune_m(model, {0.0}, observed, {}, 10, seeds),
                    ConfigError);
  REQUIRE_THROWS_AS(tune_m(model, {0.0}, observed, {10}, 1, seeds),
                    ConfigError);
  REQUIRE_THROWS_AS(tune_m(model, {5.0}, observed, {10}, 10, seeds),
                    DomainError);
}

TEST_CASE("bsl mcmc recovers the flat-prior gaussian posterior") {
  // theta is the mean of 100 unit-variance observations and the summary is
  // their average, so with an effectively flat prior the posterior is
  // N(observed, 0.01). The chain mean must agree within Monte Carlo error
  // and the spread must sit near 0.1 (slightly above: the likelihood
  // estimate adds its own noise).
  const testutil::GaussianMeanModel model(1, 100, 1.0);
  const SummaryVector observed = model.simulate_summary({2.0}, 424242);

  BslConfig config;
  config.n_iter = 10000;
  config.m = 500;
  config.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.0576);
  config.theta_init = {observed[0]};
  config.seed = 5150;
  const BslResult result = run_bsl_mcmc(model, observed, config);

  REQUIRE(result.chain.size() == 10000);
  REQUIRE(result.acceptance_rate > 0.25);
  REQUIRE(result.acceptance_rate < 0.65);
  for (const auto& s : result.chain) {
    REQUIRE(s.gamma == std::vector<double>{0.0});
    REQUIRE(std::isfinite(s.loglik));
  }

  const std::vector<double> theta = column(result, 1000, 0, 0);
  const double se = batch_means_se(theta, 30);
  REQUIRE(std::abs(testutil::mean_of(theta) - observed[0]) < 3.0 * se);
  const double sd = std::sqrt(variance(theta));
  REQUIRE(sd > 0.09);
  REQUIRE(sd < 0.125);
}

TEST_CASE("robust bsl separates model misfit from parameter shifts") {
  // Four group means share one location parameter. With data simulated from
  // the model every gamma hugs zero. Shifting one observed component by five
  // summary standard deviations must load that component's gamma instead of
  // dragging theta: the L1 prior makes absorbing the shift with a single
  // gamma cheaper than moving theta against the other three summaries.
  const testutil::GaussianMeanModel model(4, 100, 1.0);
  const SummaryVector compatible = model.simulate_summary({2.0}, 777001);
  SummaryVector shifted = compatible;
  shifted[1] += 5.0 * model.summary_sd();

  BslConfig config;
  config.n_iter = 6000;
  config.m = 120;
  config.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.04);
  config.theta_init = {2.0};
  config.seed = 31415;
  const std::size_t burn = 600;
  const double prior_sd = std::numbers::sqrt2 * config.gamma_prior_scale;

  const BslResult compat =
      run_bsl_mcmc(model, compatible, config, BslAdjustment::mean_adjust);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::vector<double> g = column(compat, burn, 1, i);
    REQUIRE(std::abs(quant(g, 0.5)) < prior_sd);
    REQUIRE(quant(g, 0.025) < 0.0);
    REQUIRE(quant(g, 0.975) > 0.0);
  }

  const BslResult incompat =
      run_bsl_mcmc(model, shifted, config, BslAdjustment::mean_adjust);
  const std::vector<double> g1 = column(incompat, burn, 1, 1);
  REQUIRE(quant(g1, 0.5) > 2.0 * prior_sd);
  for (std::size_t i : {0UL, 2UL, 3UL}) {
    const std::vector<double> g = column(incompat, burn, 1, i);
    REQUIRE(std::abs(quant(g, 0.5)) < 2.0 * prior_sd);
  }

  // theta stays where the compatible run put it.
  const std::vector<double> t_compat = column(compat, burn, 0, 0);
  const std::vector<double> t_shift = column(incompat, burn, 0, 0);
  const double lo = std::max(quant(t_compat, 0.025), quant(t_shift, 0.025));
  const double hi = std::min(quant(t_compat, 0.975), quant(t_shift, 0.975));
  REQUIRE(lo < hi);

  // Variance inflation on compatible data also keeps every gamma around 0.
  const BslResult var_adj =
      run_bsl_mcmc(model, compatible, config, BslAdjustment::variance_adjust);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::vector<double> g = column(var_adj, burn, 1, i);
    REQUIRE(quant(g, 0.025) < 0.0);
    REQUIRE(quant(g, 0.975) > 0.0);
  }
}

TEST_CASE("rejected iterations reuse the stored likelihood estimate") {
  const testutil::GaussianMeanModel model(1, 100, 1.0);
  const SummaryVector observed = model.simulate_summary({2.0}, 99);

  BslConfig config;
  config.n_iter = 300;
  config.m = 50;
  config.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.09);
  config.theta_init = {observed[0]};
  config.seed = 2718;
  REQUIRE_FALSE(config.re_estimate_current);

  const BslResult reuse = run_bsl_mcmc(model, observed, config);
  std::size_t rejections = 0;
  for (std::size_t i = 1; i < reuse.chain.size(); ++i)
    if (!reuse.chain[i].accepted) {
      ++rejections;
      REQUIRE(reuse.chain[i].loglik == reuse.chain[i - 1].loglik);
      REQUIRE(reuse.chain[i].theta == reuse.chain[i - 1].theta);
    }
  REQUIRE(rejections > 20);

  // Re-estimation at the current point changes the stored value on at least
  // some rejections; it must be opt-in.
  config.re_estimate_current = true;
  const BslResult refresh = run_bsl_mcmc(model, observed, config);
  std::size_t changed = 0;
  for (std::size_t i = 1; i < refresh.chain.size(); ++i)
    if (!refresh.chain[i].accepted &&
        refresh.chain[i].loglik != refresh.chain[i - 1].loglik)
      ++changed;
  REQUIRE(changed > 20);
}

TEST_CASE("synthetic likelihood estimate is identical across thread counts") {
  const testutil::GaussianMeanModel model(3, 60, 1.0);
  const SummaryVector observed{2.0, 2.1, 1.9};
  for (std::uint64_t seed : {1ULL, 55ULL, 9001ULL}) {
    const SeedStream seeds(seed);
    const auto one = estimate_synthetic_loglik(model, {2.0}, 40, observed,
                                               seeds, 1);
    const auto four = estimate_synthetic_loglik(model, {2.0}, 40, observed,
                                                seeds, 4);
    REQUIRE(one.mu_hat == four.mu_hat);
    REQUIRE((one.sigma_hat - four.sigma_hat).norm() == 0.0);
    REQUIRE(one.log_density_at_observed == four.log_density_at_observed);
  }
}

TEST_CASE("bsl config and input validation") {
  const testutil::GaussianMeanModel model(1, 100, 1.0);
  const SummaryVector observed{2.0};

  BslConfig bad;
  bad.n_iter = 0;
  bad.m = 0;
  bad.gamma_prior_scale = -1.0;
  bad.slice_width = 0.0;
  bad.max_estimate_attempts = 0;
  try {
    bad.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("n_iter") != std::string::npos);
    REQUIRE(msg.find("m must") != std::string::npos);
    REQUIRE(msg.find("proposal_cov") != std::string::npos);
    REQUIRE(msg.find("gamma_prior_scale") != std::string::npos);
    REQUIRE(msg.find("slice_width") != std::string::npos);
    REQUIRE(msg.find("max_estimate_attempts") != std::string::npos);
  }

  BslConfig config;
  config.n_iter = 10;
  config.m = 20;
  config.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.01);

  BslConfig small_m = config;
  small_m.m = 2;
  REQUIRE_THROWS_AS(run_bsl_mcmc(model, observed, small_m), DomainError);

  BslConfig out_of_support = config;
  out_of_support.theta_init = {25.0};
  REQUIRE_THROWS_AS(run_bsl_mcmc(model, observed, out_of_support),
                    DomainError);

  BslConfig wrong_init = config;
  wrong_init.theta_init = {1.0, 2.0};
  REQUIRE_THROWS_AS(run_bsl_mcmc(model, observed, wrong_init),
                    DimensionError);

  REQUIRE_THROWS_AS(run_bsl_mcmc(model, {2.0, 2.0}, config), DimensionError);

  BslConfig wrong_cov = config;
  wrong_cov.proposal_cov = Eigen::MatrixXd::Identity(2, 2);
  REQUIRE_THROWS_AS(run_bsl_mcmc(model, observed, wrong_cov),
                    DimensionError);

  // Non-finite observed data poisons the initial log-likelihood.
  REQUIRE_THROWS_AS(run_bsl_mcmc(model, {kInf}, config), DomainError);

  // A deterministic simulator stays singular through every retry batch.
  const ConstantModel constant;
  BslConfig for_constant = config;
  REQUIRE_THROWS_AS(run_bsl_mcmc(constant, {3.14}, for_constant),
                    SingularCovarianceError);

  // Indefinite proposal covariance is refused by the factorization.
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  REQUIRE_THROWS_AS(sbikit::detail::psd_factor(indefinite),
                    SingularCovarianceError);

  REQUIRE(std::string(bsl_adjustment_name(BslAdjustment::none)) == "none");
  REQUIRE(std::string(bsl_adjustment_name(BslAdjustment::mean_adjust)) ==
          "mean_adjust");
  REQUIRE(std::string(bsl_adjustment_name(BslAdjustment::variance_adjust)) ==
          "variance_adjust");
}

TEST_CASE("bsl chain table matches the documented format") {
  const testutil::GaussianMeanModel model(2, 50, 1.0);
  const SummaryVector observed = model.simulate_summary({2.0}, 7);

  BslConfig config;
  config.n_iter = 6;
  config.m = 30;
  config.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.04);
  config.seed = 99;
  const BslResult result =
      run_bsl_mcmc(model, observed, config, BslAdjustment::mean_adjust);

  const CsvTable table = bsl_chain_table(result);
  REQUIRE(table.header ==
          std::vector<std::string>{"iter", "theta_0", "gamma_0", "gamma_1",
                                   "loglik", "accepted"});
  REQUIRE(table.rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(table.rows[i][0] == static_cast<double>(i + 1));
    REQUIRE(table.rows[i][1] == result.chain[i].theta[0]);
    REQUIRE(table.rows[i][2] == result.chain[i].gamma[0]);
    REQUIRE(table.rows[i][3] == result.chain[i].gamma[1]);
    REQUIRE(table.rows[i][4] == result.chain[i].loglik);
    const double accepted = table.rows[i][5];
    REQUIRE((accepted == 0.0 || accepted == 1.0));
    REQUIRE(accepted == (result.chain[i].accepted ? 1.0 : 0.0));
  }
}
