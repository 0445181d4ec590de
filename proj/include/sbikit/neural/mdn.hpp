#pragma once

// Mixture density network: a conditional density estimator mapping a
// conditioner vector to the parameters of a K-component diagonal-Gaussian
// mixture over the output vector. Two tanh hidden layers feed three linear
// heads (mixture logits, component means, component log-scales). All weights
// live in one flat vector so the optimizer, the serializer, and the
// finite-difference gradient check can treat them uniformly.
//
// Inputs and outputs are z-scored with statistics frozen at training time;
// log_density and sample work in raw space and apply the standardization
// (and its jacobian) internally.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

enum class CondDirection { posterior, likelihood };

inline const char* cond_direction_name(CondDirection d) {
  switch (d) {
    case CondDirection::posterior: return "posterior";
    case CondDirection::likelihood: return "likelihood";
  }
  return "unknown";
}

// Scale floor keeps component densities bounded; the log-scale head is
// clamped above to keep exp() finite through bad optimizer excursions.
inline constexpr double kMdnSigmaFloor = 1e-3;
inline constexpr double kMdnLogScaleCap = 15.0;

struct MixtureParams {
  Eigen::VectorXd weights;  // K, sums to 1
  Eigen::MatrixXd means;    // K x O, standardized output space
  Eigen::MatrixXd sigmas;   // K x O, standardized output space
};

class CondDensityEstimator {
 public:
  CondDensityEstimator() = default;

  CondDensityEstimator(CondDirection direction, std::size_t cond_dim,
                       std::size_t out_dim, std::size_t k, std::size_t hidden)
      : direction_(direction), cond_dim_(cond_dim), out_dim_(out_dim), k_(k),
        hidden_(hidden),
        cond_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cond_dim))),
        cond_sd_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cond_dim))),
        out_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_dim))),
        out_sd_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(out_dim))) {
    if (cond_dim < 1 || out_dim < 1 || k < 1 || hidden < 1)
      throw ConfigError("density estimator: all dimensions must be positive");
    weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_weights()));
  }

  CondDirection direction() const { return direction_; }
  std::size_t cond_dim() const { return cond_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t n_components() const { return k_; }
  std::size_t hidden_dim() const { return hidden_; }

  // Flat layout: W1(H x C), b1(H), W2(H x H), b2(H), Wl(K x H), bl(K),
  // Wm(KO x H), bm(KO), Ws(KO x H), bs(KO); matrices column-major; the
  // (component k, output j) pair maps to row k*O + j of the mean and
  // log-scale heads.
  std::size_t n_weights() const {
    const std::size_t h = hidden_, c = cond_dim_, ko = k_ * out_dim_;
    return h * c + h + h * h + h + k_ * h + k_ + 2 * (ko * h + ko);
  }

  Eigen::VectorXd& weights() { return weights_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  Eigen::VectorXd& cond_mean() { return cond_mean_; }
  const Eigen::VectorXd& cond_mean() const { return cond_mean_; }
  Eigen::VectorXd& cond_sd() { return cond_sd_; }
  const Eigen::VectorXd& cond_sd() const { return cond_sd_; }
  Eigen::VectorXd& out_mean() { return out_mean_; }
  const Eigen::VectorXd& out_mean() const { return out_mean_; }
  Eigen::VectorXd& out_sd() { return out_sd_; }
  const Eigen::VectorXd& out_sd() const { return out_sd_; }

  Eigen::VectorXd standardize_cond(const std::vector<double>& raw) const {
    if (raw.size() != cond_dim_)
      throw DimensionError("density estimator: conditioner dimension mismatch");
    Eigen::VectorXd x(static_cast<Eigen::Index>(cond_dim_));
    for (std::size_t i = 0; i < cond_dim_; ++i)
      x[static_cast<Eigen::Index>(i)] =
          (raw[i] - cond_mean_[static_cast<Eigen::Index>(i)]) /
          cond_sd_[static_cast<Eigen::Index>(i)];
    return x;
  }

  Eigen::VectorXd standardize_out(const std::vector<double>& raw) const {
    if (raw.size() != out_dim_)
      throw DimensionError("density estimator: output dimension mismatch");
    Eigen::VectorXd y(static_cast<Eigen::Index>(out_dim_));
    for (std::size_t i = 0; i < out_dim_; ++i)
      y[static_cast<Eigen::Index>(i)] =
          (raw[i] - out_mean_[static_cast<Eigen::Index>(i)]) /
          out_sd_[static_cast<Eigen::Index>(i)];
    return y;
  }

  // Mixture parameters at one conditioner, in standardized output space.
  MixtureParams mixture_at(const std::vector<double>& cond_raw) const {
    const Eigen::VectorXd x = standardize_cond(cond_raw);
    const auto k = static_cast<Eigen::Index>(k_);
    const auto o = static_cast<Eigen::Index>(out_dim_);

    const Eigen::VectorXd h1 = (view_w1() * x + view_b1()).array().tanh();
    const Eigen::VectorXd h2 = (view_w2() * h1 + view_b2()).array().tanh();
    const Eigen::VectorXd logits = view_wl() * h2 + view_bl();
    const Eigen::VectorXd mu = view_wm() * h2 + view_bm();
    const Eigen::VectorXd s =
        (view_ws() * h2 + view_bs()).cwiseMin(kMdnLogScaleCap);

    MixtureParams params;
    const double lse =
        logits.maxCoeff() +
        std::log((logits.array() - logits.maxCoeff()).exp().sum());
    params.weights = (logits.array() - lse).exp();
    params.means.resize(k, o);
    params.sigmas.resize(k, o);
    for (Eigen::Index kk = 0; kk < k; ++kk)
      for (Eigen::Index j = 0; j < o; ++j) {
        params.means(kk, j) = mu[kk * o + j];
        params.sigmas(kk, j) = kMdnSigmaFloor + std::exp(s[kk * o + j]);
      }
    return params;
  }

  // Raw-space conditional log-density (standardization jacobian included).
  double log_density(const std::vector<double>& cond_raw,
                     const std::vector<double>& out_raw) const {
    const MixtureParams params = mixture_at(cond_raw);
    const Eigen::VectorXd y = standardize_out(out_raw);
    const auto k = static_cast<Eigen::Index>(k_);
    const auto o = static_cast<Eigen::Index>(out_dim_);
    Eigen::VectorXd comp(k);
    for (Eigen::Index kk = 0; kk < k; ++kk) {
      double ll = std::log(params.weights[kk]);
      for (Eigen::Index j = 0; j < o; ++j) {
        const double z = (y[j] - params.means(kk, j)) / params.sigmas(kk, j);
        ll += -0.5 * std::log(2.0 * std::numbers::pi) -
              std::log(params.sigmas(kk, j)) - 0.5 * z * z;
      }
      comp[kk] = ll;
    }
    const double top = comp.maxCoeff();
    double log_jac = 0.0;
    for (Eigen::Index j = 0; j < o; ++j) log_jac -= std::log(out_sd_[j]);
    return top + std::log((comp.array() - top).exp().sum()) + log_jac;
  }

  // One raw-space draw from the conditional.
  std::vector<double> sample(const std::vector<double>& cond_raw,
                             Rng& rng) const {
    const MixtureParams params = mixture_at(cond_raw);
    const double u = rng.uniform();
    Eigen::Index comp = 0;
    double acc = 0.0;
    for (Eigen::Index kk = 0; kk < params.weights.size(); ++kk) {
      acc += params.weights[kk];
      if (u < acc) {
        comp = kk;
        break;
      }
      comp = kk;  // saturate at the last component on rounding slack
    }
    std::vector<double> out(out_dim_);
    for (std::size_t j = 0; j < out_dim_; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double y_std =
          params.means(comp, jj) + params.sigmas(comp, jj) * rng.normal();
      out[j] = out_mean_[jj] + out_sd_[jj] * y_std;
    }
    return out;
  }

  // Weight views over the flat vector, writable counterparts for init.
  Eigen::Map<const Eigen::MatrixXd> view_w1() const {
    return {weights_.data() + off(0), hi(), ci()};
  }
  Eigen::Map<const Eigen::VectorXd> view_b1() const {
    return {weights_.data() + off(1), hi()};
  }
  Eigen::Map<const Eigen::MatrixXd> view_w2() const {
    return {weights_.data() + off(2), hi(), hi()};
  }
  Eigen::Map<const Eigen::VectorXd> view_b2() const {
    return {weights_.data() + off(3), hi()};
  }
  Eigen::Map<const Eigen::MatrixXd> view_wl() const {
    return {weights_.data() + off(4), ki(), hi()};
  }
  Eigen::Map<const Eigen::VectorXd> view_bl() const {
    return {weights_.data() + off(5), ki()};
  }
  Eigen::Map<const Eigen::MatrixXd> view_wm() const {
    return {weights_.data() + off(6), koi(), hi()};
  }
  Eigen::Map<const Eigen::VectorXd> view_bm() const {
    return {weights_.data() + off(7), koi()};
  }
  Eigen::Map<const Eigen::MatrixXd> view_ws() const {
    return {weights_.data() + off(8), koi(), hi()};
  }
  Eigen::Map<const Eigen::VectorXd> view_bs() const {
    return {weights_.data() + off(9), koi()};
  }

  // Block offset in the flat vector; blocks ordered as documented above.
  Eigen::Index off(int block) const {
    const Eigen::Index h = hi(), c = ci(), k = ki(), ko = koi();
    const Eigen::Index sizes[10] = {h * c, h,  h * h,  h,  k * h,
                                    k,     ko * h, ko, ko * h, ko};
    Eigen::Index acc = 0;
    for (int b = 0; b < block; ++b) acc += sizes[b];
    return acc;
  }

 private:
  Eigen::Index hi() const { return static_cast<Eigen::Index>(hidden_); }
  Eigen::Index ci() const { return static_cast<Eigen::Index>(cond_dim_); }
  Eigen::Index ki() const { return static_cast<Eigen::Index>(k_); }
  Eigen::Index koi() const {
    return static_cast<Eigen::Index>(k_ * out_dim_);
  }

  CondDirection direction_ = CondDirection::posterior;
  std::size_t cond_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::size_t k_ = 0;
  std::size_t hidden_ = 0;
  Eigen::VectorXd weights_;
  Eigen::VectorXd cond_mean_, cond_sd_, out_mean_, out_sd_;
};

namespace detail {

// Batched loss (mean negative standardized-space log-density) and, when
// grad != nullptr, its gradient with respect to every weight. X is B x C of
// standardized conditioners, Y is B x O of standardized outputs. Kept out of
// the class so the finite-difference check can drive it directly.
inline double mdn_loss(const CondDensityEstimator& est,
                       const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       Eigen::VectorXd* grad = nullptr) {
  const Eigen::Index B = X.rows();
  const auto H = static_cast<Eigen::Index>(est.hidden_dim());
  const auto K = static_cast<Eigen::Index>(est.n_components());
  const auto O = static_cast<Eigen::Index>(est.out_dim());
  const Eigen::Index KO = K * O;

  const auto W1 = est.view_w1();
  const auto W2 = est.view_w2();
  const auto Wl = est.view_wl();
  const auto Wm = est.view_wm();
  const auto Ws = est.view_ws();

  const Eigen::MatrixXd H1 =
      ((X * W1.transpose()).rowwise() + est.view_b1().transpose())
          .array()
          .tanh();
  const Eigen::MatrixXd H2 =
      ((H1 * W2.transpose()).rowwise() + est.view_b2().transpose())
          .array()
          .tanh();
  const Eigen::MatrixXd Logits =
      (H2 * Wl.transpose()).rowwise() + est.view_bl().transpose();
  const Eigen::MatrixXd Mu =
      (H2 * Wm.transpose()).rowwise() + est.view_bm().transpose();
  const Eigen::MatrixXd S =
      ((H2 * Ws.transpose()).rowwise() + est.view_bs().transpose())
          .cwiseMin(kMdnLogScaleCap);
  const Eigen::MatrixXd Sig = S.array().exp() + kMdnSigmaFloor;

  // Component log-likelihoods.
  Eigen::MatrixXd Yrep(B, KO);
  for (Eigen::Index k = 0; k < K; ++k)
    Yrep.middleCols(k * O, O) = Y;
  const Eigen::MatrixXd D = (Yrep - Mu).cwiseQuotient(Sig);
  Eigen::MatrixXd LL(B, K);
  const Eigen::MatrixXd neg_half_d2_minus_logsig =
      (-0.5 * D.array().square() - Sig.array().log()).matrix();
  for (Eigen::Index k = 0; k < K; ++k)
    LL.col(k) = neg_half_d2_minus_logsig.middleCols(k * O, O).rowwise().sum();
  LL.array() -= 0.5 * static_cast<double>(O) * std::log(2.0 * std::numbers::pi);

  // Row-wise log-softmax of the logits, then log-sum-exp over components.
  const Eigen::VectorXd logit_max = Logits.rowwise().maxCoeff();
  const Eigen::VectorXd logit_lse =
      logit_max.array() +
      (Logits.colwise() - logit_max).array().exp().rowwise().sum().log();
  const Eigen::MatrixXd LogW = Logits.colwise() - logit_lse;
  const Eigen::MatrixXd A = LogW + LL;
  const Eigen::VectorXd a_max = A.rowwise().maxCoeff();
  const Eigen::VectorXd logq =
      a_max.array() +
      (A.colwise() - a_max).array().exp().rowwise().sum().log();
  const double loss = -logq.mean();

  if (!grad) return loss;
  grad->setZero(static_cast<Eigen::Index>(est.n_weights()));

  const double inv_b = 1.0 / static_cast<double>(B);
  const Eigen::MatrixXd R = (A.colwise() - logq).array().exp();
  const Eigen::MatrixXd Wmix = LogW.array().exp();
  const Eigen::MatrixXd GL = (Wmix - R) * inv_b;

  Eigen::MatrixXd Rrep(B, KO);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < O; ++j) Rrep.col(k * O + j) = R.col(k);
  const Eigen::MatrixXd GM =
      (-inv_b) * Rrep.array() * D.array() / Sig.array();
  // The log-scale cap zeroes the gradient of any clamped entry.
  const Eigen::MatrixXd unclamped =
      (S.array() < kMdnLogScaleCap).cast<double>();
  const Eigen::MatrixXd GS = (-inv_b) * Rrep.array() *
                             (D.array().square() - 1.0) *
                             (Sig.array() - kMdnSigmaFloor) / Sig.array() *
                             unclamped.array();

  auto gw1 = Eigen::Map<Eigen::MatrixXd>(grad->data() + est.off(0), H,
                                         X.cols());
  auto gb1 = Eigen::Map<Eigen::VectorXd>(grad->data() + est.off(1), H);
  auto gw2 = Eigen::Map<Eigen::MatrixXd>(grad->data() + est.off(2), H, H);
  auto gb2 = Eigen::Map<Eigen::VectorXd>(grad->data() + est.off(3), H);
  auto gwl = Eigen::Map<Eigen::MatrixXd>(grad->data() + est.off(4), K, H);
  auto gbl = Eigen::Map<Eigen::VectorXd>(grad->data() + est.off(5), K);
  auto gwm = Eigen::Map<Eigen::MatrixXd>(grad->data() + est.off(6), KO, H);
  auto gbm = Eigen::Map<Eigen::VectorXd>(grad->data() + est.off(7), KO);
  auto gws = Eigen::Map<Eigen::MatrixXd>(grad->data() + est.off(8), KO, H);
  auto gbs = Eigen::Map<Eigen::VectorXd>(grad->data() + est.off(9), KO);

  gwl = GL.transpose() * H2;
  gbl = GL.colwise().sum();
  gwm = GM.transpose() * H2;
  gbm = GM.colwise().sum();
  gws = GS.transpose() * H2;
  gbs = GS.colwise().sum();

  const Eigen::MatrixXd GH2 = GL * Wl + GM * Wm + GS * Ws;
  const Eigen::MatrixXd GZ2 =
      GH2.array() * (1.0 - H2.array().square());
  gw2 = GZ2.transpose() * H1;
  gb2 = GZ2.colwise().sum();
  const Eigen::MatrixXd GH1 = GZ2 * W2;
  const Eigen::MatrixXd GZ1 =
      GH1.array() * (1.0 - H1.array().square());
  gw1 = GZ1.transpose() * X;
  gb1 = GZ1.colwise().sum();
  return loss;
}

}  // namespace detail

}  // namespace sbikit
