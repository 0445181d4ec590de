#pragma once

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

struct UniformMarginal {
  double lo;
  double hi;
};

struct LaplaceMarginal {
  double loc;
  double scale;
};

using PriorMarginal = std::variant<UniformMarginal, LaplaceMarginal>;

// Product prior over independent marginals. Uniform components are the
// workhorse; Laplace components exist for the adjustment parameters of the
// robustified algorithms.
class PriorSpec {
 public:
  PriorSpec() = default;

  explicit PriorSpec(std::vector<PriorMarginal> marginals)
      : marginals_(std::move(marginals)) {
    for (const auto& m : marginals_) {
      if (const auto* u = std::get_if<UniformMarginal>(&m)) {
        if (!(u->lo < u->hi) || !std::isfinite(u->lo) || !std::isfinite(u->hi))
          throw DomainError("uniform marginal: require finite lo < hi");
      } else {
        const auto& l = std::get<LaplaceMarginal>(m);
        if (!(l.scale > 0.0) || !std::isfinite(l.loc) || !std::isfinite(l.scale))
          throw DomainError("laplace marginal: require finite loc, scale > 0");
      }
    }
  }

  static PriorSpec uniform_box(const std::vector<double>& lo,
                               const std::vector<double>& hi) {
    if (lo.size() != hi.size())
      throw DimensionError("uniform_box: lo/hi size mismatch");
    std::vector<PriorMarginal> ms;
    ms.reserve(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i)
      ms.push_back(UniformMarginal{lo[i], hi[i]});
    return PriorSpec(std::move(ms));
  }

  std::size_t dim() const { return marginals_.size(); }
  const std::vector<PriorMarginal>& marginals() const { return marginals_; }

  ParamVector sample(Rng& rng) const {
    ParamVector out(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      if (const auto* u = std::get_if<UniformMarginal>(&marginals_[i]))
        out[i] = rng.uniform(u->lo, u->hi);
      else {
        const auto& l = std::get<LaplaceMarginal>(marginals_[i]);
        out[i] = rng.laplace(l.loc, l.scale);
      }
    }
    return out;
  }

  double log_density(const ParamVector& theta) const {
    if (theta.size() != dim())
      throw DimensionError("prior log_density: dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (const auto* u = std::get_if<UniformMarginal>(&marginals_[i])) {
        if (theta[i] < u->lo || theta[i] > u->hi)
          return -std::numeric_limits<double>::infinity();
        lp -= std::log(u->hi - u->lo);
      } else {
        const auto& l = std::get<LaplaceMarginal>(marginals_[i]);
        lp += -std::log(2.0 * l.scale) - std::fabs(theta[i] - l.loc) / l.scale;
      }
    }
    return lp;
  }

  bool in_support(const ParamVector& theta) const {
    if (theta.size() != dim())
      throw DimensionError("prior in_support: dimension mismatch");
    for (std::size_t i = 0; i < dim(); ++i)
      if (const auto* u = std::get_if<UniformMarginal>(&marginals_[i]))
        if (theta[i] < u->lo || theta[i] > u->hi) return false;
    return true;
  }

  double marginal_mean(std::size_t i) const {
    check_index(i);
    if (const auto* u = std::get_if<UniformMarginal>(&marginals_[i]))
      return 0.5 * (u->lo + u->hi);
    return std::get<LaplaceMarginal>(marginals_[i]).loc;
  }

  double marginal_sd(std::size_t i) const {
    check_index(i);
    if (const auto* u = std::get_if<UniformMarginal>(&marginals_[i]))
      return (u->hi - u->lo) / std::sqrt(12.0);
    return std::get<LaplaceMarginal>(marginals_[i]).scale * std::sqrt(2.0);
  }

  ParamVector mean() const {
    ParamVector out(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = marginal_mean(i);
    return out;
  }

 private:
  void check_index(std::size_t i) const {
    if (i >= dim()) throw DimensionError("prior: marginal index out of range");
  }

  std::vector<PriorMarginal> marginals_;
};

}  // namespace sbikit
