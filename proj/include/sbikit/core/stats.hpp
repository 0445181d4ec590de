#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sbikit/core/errors.hpp"

namespace sbikit {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw DomainError("mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw DomainError("variance: need at least 2 points");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double sd(const std::vector<double>& x) { return std::sqrt(variance(x)); }

// Type-7 quantile (linear interpolation of order statistics), the default in
// most statistical environments. p in [0,1].
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw DomainError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile: p outside [0,1]");
  std::sort(x.begin(), x.end());
  const double h = p * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

inline double iqr(const std::vector<double>& x) {
  return quantile(x, 0.75) - quantile(x, 0.25);
}

// Sample skewness and kurtosis (biased, moment definitions). kurtosis is the
// raw fourth standardised moment, not excess.
inline double skewness(const std::vector<double>& x) {
  if (x.size() < 2) throw DomainError("skewness: need at least 2 points");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

inline double kurtosis(const std::vector<double>& x) {
  if (x.size() < 2) throw DomainError("kurtosis: need at least 2 points");
  const double m = mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m4 /= n;
  if (m2 <= 0.0) return 0.0;
  return m4 / (m2 * m2);
}

// Unbiased sample mean and covariance of row-wise observations.
inline Eigen::VectorXd sample_mean(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 1) throw DomainError("sample_mean: empty sample");
  return rows.colwise().mean();
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw DomainError("sample_covariance: need >= 2 rows");
  const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
  return (centered.transpose() * centered) /
         static_cast<double>(rows.rows() - 1);
}

// Monte Carlo standard error of a correlated chain via non-overlapping batch
// means. Falls back to the iid formula when the chain is too short to batch.
inline double batch_means_se(const std::vector<double>& chain,
                             std::size_t n_batches = 10) {
  if (chain.size() < 4) throw DomainError("batch_means_se: chain too short");
  n_batches = std::min(n_batches, chain.size() / 2);
  if (n_batches < 2) n_batches = 2;
  const std::size_t batch_len = chain.size() / n_batches;
  std::vector<double> batch_mean(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * batch_len; i < (b + 1) * batch_len; ++i)
      s += chain[i];
    batch_mean[b] = s / static_cast<double>(batch_len);
  }
  return sd(batch_mean) / std::sqrt(static_cast<double>(n_batches));
}

}  // namespace sbikit
