#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"

#include <cmath>
#include <vector>

namespace paralab {

/// Truncation and resolution of the integrals int_0^inf (.) dt/t.
struct QuadratureSpec {
  double t_min_factor = 1e-2;
  double t_max_factor = 1e2;
  int nodes_per_decade = 40;
};

/// Trapezoid rule in log t on [t_min, t_max]; int F dt/t ~ sum_k w_k F(t_k).
class QuadratureGrid {
 public:
  QuadratureGrid(double t_min, double t_max, int nodes_per_decade, Index intervals = 0)
      : t_min_(t_min), t_max_(t_max), npd_(nodes_per_decade) {
    require(t_min > 0 && t_max > t_min, ErrorKind::parameter, "quadrature needs 0 < t_min < t_max");
    require(nodes_per_decade >= 1, ErrorKind::parameter, "nodes_per_decade must be positive");
    const double decades = std::log10(t_max / t_min);
    intervals_ = intervals > 0 ? intervals
                               : std::max<Index>(1, static_cast<Index>(std::ceil(decades * nodes_per_decade - 1e-9)));
    const double a = std::log(t_min), b = std::log(t_max);
    const double step = (b - a) / static_cast<double>(intervals_);
    nodes_.resize(static_cast<std::size_t>(intervals_ + 1));
    weights_.assign(nodes_.size(), step);
    for (Index k = 0; k <= intervals_; ++k)
      nodes_[static_cast<std::size_t>(k)] = std::exp(a + step * static_cast<double>(k));
    nodes_.front() = t_min;
    nodes_.back() = t_max;
    weights_.front() *= 0.5;
    weights_.back() *= 0.5;
  }

  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  int nodes_per_decade() const { return npd_; }
  Index size() const { return static_cast<Index>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  double node(Index k) const { return nodes_[static_cast<std::size_t>(k)]; }
  double weight(Index k) const { return weights_[static_cast<std::size_t>(k)]; }

  /// Same endpoints, every interval halved (nested nodes).
  QuadratureGrid refined() const { return QuadratureGrid(t_min_, t_max_, 2 * npd_, 2 * intervals_); }

  /// t_min <= c0/lambda_max and t_max >= C0/lambda_min_nonzero.
  bool adapted_to(const SpectralCalculus& calc, double c0 = 1e-2, double C0 = 1e2) const {
    const double eps = 1e-12;
    return t_min_ <= c0 / calc.lambda_max() * (1 + eps) && t_max_ >= C0 / calc.lambda_min_nonzero() * (1 - eps);
  }

 private:
  double t_min_, t_max_;
  int npd_;
  Index intervals_ = 1;
  std::vector<double> nodes_, weights_;
};

/// Grid spanning [t_min_factor/lambda_max, t_max_factor/lambda_min_nonzero].
inline QuadratureGrid adapted_grid(const SpectralCalculus& calc, const QuadratureSpec& spec = {}) {
  require(calc.lambda_max() > 0 && std::isfinite(calc.lambda_min_nonzero()), ErrorKind::parameter,
          "generator has no nonzero spectrum");
  return QuadratureGrid(spec.t_min_factor / calc.lambda_max(), spec.t_max_factor / calc.lambda_min_nonzero(),
                        spec.nodes_per_decade);
}

/// Adapted grid whose small-t end also bounds the tail of an integrand that
/// behaves like (t lambda_max)^kappa as t -> 0: int_0^{t_min} ~ (t_min lambda_max)^kappa / kappa <= tol.
inline QuadratureGrid adapted_grid_for_power(const SpectralCalculus& calc, double kappa, const QuadratureSpec& spec = {},
                                             double tol = 1e-10) {
  require(kappa > 0, ErrorKind::parameter, "small-t exponent must be positive");
  QuadratureSpec s = spec;
  const double x = std::pow(tol * kappa, 1.0 / kappa);
  s.t_min_factor = std::min(s.t_min_factor, x);
  return adapted_grid(calc, s);
}

}  // namespace paralab
