#pragma once

// Bijections between a constrained parameter space and R^d. MCMC moves and
// proposal covariances live in the unconstrained space; densities pushed
// forward pick up the log-Jacobian terms computed here.

#include <cmath>
#include <utility>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

namespace detail {
// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace detail

struct TransformedPoint {
  std::vector<double> value;
  double log_jacobian;  // log |d(transformed)/d(original)|
};

class BoundTransform {
 public:
  struct Dim {
    bool bounded;  // logit dim if true, identity otherwise
    double lo;
    double hi;
  };

  BoundTransform() = default;
  explicit BoundTransform(std::vector<Dim> dims) : dims_(std::move(dims)) {
    for (const auto& d : dims_)
      if (d.bounded && !(d.lo < d.hi))
        throw DomainError("bound transform: require lo < hi");
  }

  static BoundTransform identity(std::size_t n) {
    return BoundTransform(std::vector<Dim>(n, Dim{false, 0.0, 0.0}));
  }

  // Logit for uniform marginals, identity for unbounded ones.
  static BoundTransform for_prior(const PriorSpec& prior) {
    std::vector<Dim> dims;
    dims.reserve(prior.dim());
    for (const auto& m : prior.marginals()) {
      if (const auto* u = std::get_if<UniformMarginal>(&m))
        dims.push_back(Dim{true, u->lo, u->hi});
      else
        dims.push_back(Dim{false, 0.0, 0.0});
    }
    return BoundTransform(std::move(dims));
  }

  std::size_t dim() const { return dims_.size(); }

  TransformedPoint forward(const ParamVector& theta) const {
    if (theta.size() != dims_.size())
      throw DimensionError("transform forward: dimension mismatch");
    TransformedPoint out;
    out.value.resize(dims_.size());
    out.log_jacobian = 0.0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      const auto& d = dims_[i];
      if (!d.bounded) {
        out.value[i] = theta[i];
        continue;
      }
      if (!(theta[i] > d.lo) || !(theta[i] < d.hi))
        throw DomainError("transform forward: value outside open interval");
      const double p = theta[i] - d.lo;
      const double q = d.hi - theta[i];
      out.value[i] = std::log(p / q);
      // d phi / d theta = (hi - lo) / (p q)
      out.log_jacobian += std::log(d.hi - d.lo) - std::log(p) - std::log(q);
    }
    return out;
  }

  ParamVector inverse(const std::vector<double>& phi) const {
    if (phi.size() != dims_.size())
      throw DimensionError("transform inverse: dimension mismatch");
    ParamVector out(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      const auto& d = dims_[i];
      if (!d.bounded) {
        out[i] = phi[i];
        continue;
      }
      const double s = 1.0 / (1.0 + std::exp(-phi[i]));
      out[i] = d.lo + (d.hi - d.lo) * s;
      // Guard the open interval against rounding at extreme phi.
      if (out[i] <= d.lo) out[i] = std::nextafter(d.lo, d.hi);
      if (out[i] >= d.hi) out[i] = std::nextafter(d.hi, d.lo);
    }
    return out;
  }

  // log |d theta / d phi| at phi; the inverse-direction Jacobian.
  double log_jacobian_inverse(const std::vector<double>& phi) const {
    if (phi.size() != dims_.size())
      throw DimensionError("transform jacobian: dimension mismatch");
    double lj = 0.0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      const auto& d = dims_[i];
      if (!d.bounded) continue;
      // d theta / d phi = (hi - lo) sigma(phi) (1 - sigma(phi))
      lj += std::log(d.hi - d.lo) - detail::softplus(phi[i]) -
            detail::softplus(-phi[i]);
    }
    return lj;
  }

  const std::vector<Dim>& dims() const { return dims_; }

 private:
  std::vector<Dim> dims_;
};

// Density of the prior pushed to the unconstrained space.
inline double log_prior_transformed(const PriorSpec& prior,
                                    const BoundTransform& t,
                                    const std::vector<double>& phi) {
  const ParamVector theta = t.inverse(phi);
  const double lp = prior.log_density(theta);
  if (!std::isfinite(lp)) return lp;
  return lp + t.log_jacobian_inverse(phi);
}

}  // namespace sbikit
