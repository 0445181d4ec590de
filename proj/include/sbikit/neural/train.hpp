#pragma once

// Training for the conditional density estimator: adaptive-moment gradient
// descent on the mean negative conditional log-density, with a validation
// split, early stopping, and best-weight restoration. Deterministic for a
// fixed seed: initialization, the train/validation split, and every epoch's
// batch order all come from the same seed stream.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/parallel.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/neural/mdn.hpp"

namespace sbikit {

struct TrainingPair {
  ParamVector theta;
  SummaryVector summary;
};

struct TrainingConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;       // epochs without validation improvement
  double val_fraction = 0.1;
  std::size_t rounds = 10;         // sequential schemes only
  std::size_t sims_per_round = 10000;
  std::size_t k = 8;               // mixture components
  std::size_t hidden = 64;         // width of both hidden layers
  std::uint64_t seed = 1;
  unsigned threads = 1;            // simulation generation only

  void validate() const {
    std::vector<std::string> problems;
    if (!(learning_rate > 0.0))
      problems.push_back("learning_rate must be positive");
    if (batch_size < 1) problems.push_back("batch_size must be at least 1");
    if (max_epochs < 1) problems.push_back("max_epochs must be at least 1");
    if (patience < 1) problems.push_back("patience must be at least 1");
    if (!(val_fraction > 0.0 && val_fraction < 0.5))
      problems.push_back("val_fraction must lie in (0, 0.5)");
    if (rounds < 1) problems.push_back("rounds must be at least 1");
    if (sims_per_round < 1)
      problems.push_back("sims_per_round must be at least 1");
    if (k < 1) problems.push_back("k must be at least 1");
    if (hidden < 1) problems.push_back("hidden must be at least 1");
    if (!problems.empty()) throw ConfigError(problems);
  }
};

struct TrainingReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;   // standardized-space mean negative log-density
  double final_train_loss = 0.0;
  std::vector<double> val_loss_curve;
};

namespace detail {

inline void standardize_columns(Eigen::MatrixXd& data, Eigen::VectorXd& mean,
                                Eigen::VectorXd& sd) {
  mean = data.colwise().mean();
  sd.resize(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double var =
        (data.col(j).array() - mean[j]).square().sum() /
        static_cast<double>(data.rows());
    // A constant column carries no information; unit scale keeps the z-score
    // finite instead of poisoning the loss.
    sd[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    data.col(j) = (data.col(j).array() - mean[j]) / sd[j];
  }
}

}  // namespace detail

// Trains a mixture density network on (theta, summary) pairs. direction
// picks which side conditions: posterior learns theta given summary,
// likelihood learns summary given theta.
inline CondDensityEstimator train_cnde(const std::vector<TrainingPair>& pairs,
                                       CondDirection direction,
                                       const TrainingConfig& config,
                                       TrainingReport* report = nullptr) {
  config.validate();
  if (pairs.size() < 100)
    throw DomainError("train_cnde: need at least 100 training pairs, got " +
                      std::to_string(pairs.size()));
  const std::size_t n = pairs.size();
  const std::size_t d_theta = pairs.front().theta.size();
  const std::size_t d_sum = pairs.front().summary.size();
  for (const auto& p : pairs)
    if (p.theta.size() != d_theta || p.summary.size() != d_sum)
      throw DimensionError("train_cnde: inconsistent pair dimensions");

  const std::size_t cond_dim =
      direction == CondDirection::posterior ? d_sum : d_theta;
  const std::size_t out_dim =
      direction == CondDirection::posterior ? d_theta : d_sum;

  Eigen::MatrixXd cond(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(cond_dim));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(out_dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c =
        direction == CondDirection::posterior ? pairs[i].summary
                                              : pairs[i].theta;
    const auto& o =
        direction == CondDirection::posterior ? pairs[i].theta
                                              : pairs[i].summary;
    for (std::size_t j = 0; j < cond_dim; ++j)
      cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c[j];
    for (std::size_t j = 0; j < out_dim; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = o[j];
  }

  CondDensityEstimator est(direction, cond_dim, out_dim, config.k,
                           config.hidden);
  detail::standardize_columns(cond, est.cond_mean(), est.cond_sd());
  detail::standardize_columns(out, est.out_mean(), est.out_sd());

  // Initialization: weight matrices at 1/sqrt(fan_in) scale, mean-head
  // biases spread to break component symmetry, log-scale biases at zero so
  // components start near unit spread in standardized space.
  const SeedStream root(config.seed);
  Rng init_rng = root.stream(0);
  auto& w = est.weights();
  const auto fill = [&](int block, Eigen::Index rows, Eigen::Index fan_in,
                        double scale) {
    Eigen::Map<Eigen::MatrixXd> view(w.data() + est.off(block), rows, fan_in);
    for (Eigen::Index j = 0; j < view.size(); ++j)
      view.data()[j] = scale * init_rng.normal();
  };
  const auto h = static_cast<Eigen::Index>(config.hidden);
  const auto ko = static_cast<Eigen::Index>(config.k * out_dim);
  fill(0, h, static_cast<Eigen::Index>(cond_dim),
       1.0 / std::sqrt(static_cast<double>(cond_dim)));
  fill(2, h, h, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  fill(4, static_cast<Eigen::Index>(config.k), h,
       1.0 / std::sqrt(static_cast<double>(config.hidden)));
  fill(6, ko, h, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  fill(8, ko, h, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  {
    Eigen::Map<Eigen::VectorXd> bm(w.data() + est.off(7), ko);
    for (Eigen::Index j = 0; j < ko; ++j) bm[j] = 0.5 * init_rng.normal();
  }

  // Split after one deterministic shuffle; the tail becomes validation.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = root.stream(1);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i],
              order[shuffle_rng.uniform_int(i + 1)]);
  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.val_fraction *
                                  static_cast<double>(n)));
  const std::size_t n_train = n - n_val;
  if (n_train < 1) throw DomainError("train_cnde: empty training split");

  const auto gather = [&](std::size_t begin, std::size_t count,
                          const Eigen::MatrixXd& src) {
    Eigen::MatrixXd dst(static_cast<Eigen::Index>(count), src.cols());
    for (std::size_t i = 0; i < count; ++i)
      dst.row(static_cast<Eigen::Index>(i)) =
          src.row(static_cast<Eigen::Index>(order[begin + i]));
    return dst;
  };
  const Eigen::MatrixXd val_cond = gather(n_train, n_val, cond);
  const Eigen::MatrixXd val_out = gather(n_train, n_val, out);

  std::vector<std::size_t> train_order(order.begin(),
                                       order.begin() +
                                           static_cast<std::ptrdiff_t>(n_train));

  Eigen::VectorXd grad(static_cast<Eigen::Index>(est.n_weights()));
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(grad.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(grad.size());
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t adam_t = 0;

  Eigen::VectorXd best_weights = est.weights();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;
  double last_train_loss = 0.0;
  TrainingReport local_report;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = n_train - 1; i > 0; --i)
      std::swap(train_order[i], train_order[shuffle_rng.uniform_int(i + 1)]);

    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n_train;
         start += config.batch_size) {
      const std::size_t b =
          std::min(config.batch_size, n_train - start);
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(b), cond.cols());
      Eigen::MatrixXd by(static_cast<Eigen::Index>(b), out.cols());
      for (std::size_t i = 0; i < b; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) =
            cond.row(static_cast<Eigen::Index>(train_order[start + i]));
        by.row(static_cast<Eigen::Index>(i)) =
            out.row(static_cast<Eigen::Index>(train_order[start + i]));
      }
      const double loss = detail::mdn_loss(est, bx, by, &grad);
      if (!std::isfinite(loss))
        throw TrainingError("train_cnde: non-finite training loss at epoch " +
                            std::to_string(epoch));
      epoch_loss += loss;
      ++n_batches;

      ++adam_t;
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
      adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
      adam_v = beta2 * adam_v.array() +
               (1.0 - beta2) * grad.array().square();
      est.weights().array() -=
          config.learning_rate * (adam_m.array() / corr1) /
          ((adam_v.array() / corr2).sqrt() + adam_eps);
    }
    last_train_loss = epoch_loss / static_cast<double>(n_batches);

    const double val_loss = detail::mdn_loss(est, val_cond, val_out);
    if (!std::isfinite(val_loss))
      throw TrainingError("train_cnde: non-finite validation loss at epoch " +
                          std::to_string(epoch));
    local_report.val_loss_curve.push_back(val_loss);
    local_report.epochs_run = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      best_weights = est.weights();
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  est.weights() = best_weights;
  local_report.best_epoch = best_epoch;
  local_report.best_val_loss = best_val;
  local_report.final_train_loss = last_train_loss;
  if (report) *report = local_report;
  return est;
}

// Simulates n (theta, summary) pairs with theta from the model prior,
// slot-parallel and deterministic in the seed stream.
template <SimulatorModel M>
std::vector<TrainingPair> simulate_training_pairs(const M& model,
                                                  std::size_t n,
                                                  const SeedStream& seeds,
                                                  unsigned threads = 1) {
  std::vector<TrainingPair> pairs(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const SeedStream slot = seeds.sub(i);
    Rng rng = slot.stream(0);
    TrainingPair p;
    p.theta = model.prior().sample(rng);
    p.summary = simulate_with_retry(model, p.theta, slot.sub(1));
    pairs[i] = std::move(p);
  });
  return pairs;
}

}  // namespace sbikit
