#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"
#include "paralab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace paralab {

struct CarreIdentityReport {
  double residual_strong = 0.0;
  /// NaN unless a calculus and t-grid were supplied
  double residual_weak_max_t = std::nan("");
  /// max over t and x of |e^{-tL}[L(fg) - Lf g - f Lg]| / |2 e^{-tL} Gamma(f,g)|,
  /// restricted to points where the denominator is not negligible
  double weak_inequality_ratio = std::nan("");
};

inline CarreIdentityReport check_carre_identity(const Generator& gen, const Field& f, const Field& g) {
  CarreIdentityReport rep;
  rep.residual_strong = strong_carre_residual(gen, f, g);
  return rep;
}

inline CarreIdentityReport check_carre_identity(const Generator& gen, const Field& f, const Field& g,
                                                const SpectralCalculus& calc, const std::vector<double>& t_grid) {
  CarreIdentityReport rep = check_carre_identity(gen, f, g);
  const Field fg = f.cwiseProduct(g);
  const Field lead = gen.apply(fg) - gen.apply(f).cwiseProduct(g) - f.cwiseProduct(gen.apply(g));
  const Field gam = 2.0 * gamma(gen, f, g);
  const double scale = carre_scale(gen, f, g);
  double weak = 0.0, ratio = 0.0;
  for (double t : t_grid) {
    require(t > 0, ErrorKind::parameter, "t-grid entries must be positive");
    const Field a = calc.semigroup(t, lead);
    const Field b = calc.semigroup(t, gam);
    weak = std::max(weak, sup_norm(a + b) / (scale > 0 ? scale : 1.0));
    const double floor = 1e-8 * std::max(sup_norm(b), 1e-300);
    for (Index x = 0; x < a.size(); ++x)
      if (std::abs(b(x)) > floor) ratio = std::max(ratio, std::abs(a(x)) / std::abs(b(x)));
  }
  rep.residual_weak_max_t = weak;
  rep.weak_inequality_ratio = ratio;
  return rep;
}

struct R2Report {
  /// max ||Gamma f||_2 / ||L^{1/2} f||_2
  double r2_max_ratio = 0.0;
  /// max |int |Gamma(f,f)| dmu - Re<Lf,f>_mu| / Re<Lf,f>_mu
  double r2_equality_residual = 0.0;
  /// max |int Lf g dmu| / int Gamma f Gamma g dmu
  double carre2_max_ratio = 0.0;
  /// max |int Gamma(f,g) dmu - <Lf, g>_mu| relative, the summation-by-parts identity
  double sbp_residual = 0.0;
  Index samples = 0;
  Index skipped = 0;
  bool r2_checked = false;
};

/// Samples are real, kernel-free fields. (R2) needs a self-adjoint generator
/// for the spectral square root; carre2 is always reported.
inline R2Report check_r2_and_carre2(const SpectralCalculus& calc, Index samples, std::uint64_t seed) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  const RVec& mu = calc.mu();
  const Index n = gen.size();
  R2Report rep;
  rep.r2_checked = gen.self_adjoint;
  const double lnorm = std::max(gen.norm(), 1e-300);
  auto kernel_free_real = [&](std::mt19937_64& rng) {
    Field f = random_real(n, rng).cast<Complex>();
    f -= calc.kernel_component(f);
    return Field(f.real().cast<Complex>());
  };
  for (Index s = 0; s < samples; ++s) {
    auto rng = make_rng(seed, 0x52, static_cast<std::uint64_t>(s));
    const Field f = kernel_free_real(rng);
    const Field g = kernel_free_real(rng);
    const double fscale = lnorm * std::pow(lp_norm(mu, f, 2.0), 2);
    bool used = false;
    if (gen.self_adjoint) {
      const double num = lp_norm(mu, gamma_len(gen, f).cast<Complex>(), 2.0);
      const double den = lp_norm(mu, calc.frac_power(0.5, f).value, 2.0);
      const double form = mu_inner(mu, gen.apply(f), f).real();
      if (den * den >= 1e-14 * fscale && form >= 1e-14 * fscale) {
        rep.r2_max_ratio = std::max(rep.r2_max_ratio, num / den);
        double integral = 0.0;
        const RVec gf = gamma(gen, f, f).cwiseAbs();
        for (Index x = 0; x < n; ++x) integral += gf(x) * mu(x);
        rep.r2_equality_residual = std::max(rep.r2_equality_residual, std::abs(integral - form) / form);
        used = true;
      }
    }
    const RVec gl_f = gamma_len(gen, f), gl_g = gamma_len(gen, g);
    double den = 0.0;
    Complex num = 0.0, sbp = 0.0;
    const Field lf = gen.apply(f);
    const Field gfg = gamma(gen, f, g);
    for (Index x = 0; x < n; ++x) {
      den += gl_f(x) * gl_g(x) * mu(x);
      num += lf(x) * g(x) * mu(x);
      sbp += gfg(x) * mu(x);
    }
    const double pair_scale = lnorm * lp_norm(mu, f, 2.0) * lp_norm(mu, g, 2.0);
    if (den >= 1e-14 * pair_scale) {
      rep.carre2_max_ratio = std::max(rep.carre2_max_ratio, std::abs(num) / den);
      if (gen.self_adjoint && gen.conservative)
        rep.sbp_residual = std::max(rep.sbp_residual, std::abs(sbp - num) / std::max(den, std::abs(num)));
      used = true;
    }
    if (used)
      ++rep.samples;
    else
      ++rep.skipped;
  }
  return rep;
}

}  // namespace paralab
