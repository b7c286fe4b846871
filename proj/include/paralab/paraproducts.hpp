#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"
#include "paralab/operators.hpp"
#include "paralab/quadrature.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace paralab {

namespace detail {

inline void note_grid(const SpectralCalculus& calc, const QuadratureGrid& grid, std::vector<std::string>* warnings) {
  if (warnings && !grid.adapted_to(calc)) warnings->push_back("quadrature grid is not adapted to the spectrum");
}

inline auto phi_fn(int D, double t) {
  return [D, t](Complex z) { return phi_N(D, Complex(t) * z); };
}
inline auto psi_fn(int D, double t) {
  return [D, t](Complex z) { return psi_N(D, Complex(t) * z); };
}
inline auto tilde_fn(int D, double t) {
  return [D, t](Complex z) { return tilde_psi_N(D, Complex(t) * z); };
}
inline auto tlp_fn(int D, double t) {
  return [D, t](Complex z) { return Complex(t) * z * phi_N(D, Complex(t) * z); };
}

}  // namespace detail

/// The three pieces of the product decomposition fg = Pi(f,g) + Pi_g(f) + Pi_f(g).
struct ProductTerms {
  Field resonant;  ///< Pi(f,g) = int Q_t(P_t f . P_t g) dt/t
  Field pi_g_f;    ///< Pi_g(f) = int P_t(Q_t f . P_t g) dt/t
  Field pi_f_g;    ///< Pi_f(g) = int P_t(P_t f . Q_t g) dt/t
};

inline ProductTerms product_terms(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                                  const QuadratureGrid& grid, std::vector<std::string>* warnings = nullptr) {
  detail::note_grid(calc, grid, warnings);
  const Index n = calc.size();
  ProductTerms out{Field::Zero(n), Field::Zero(n), Field::Zero(n)};
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k), w = grid.weight(k);
    const Field pf = calc.apply(detail::phi_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    const Field qf = calc.apply(detail::psi_fn(D, t), f);
    const Field qg = calc.apply(detail::psi_fn(D, t), g);
    out.resonant += w * calc.apply(detail::psi_fn(D, t), pf.cwiseProduct(pg));
    out.pi_g_f += w * calc.apply(detail::phi_fn(D, t), qf.cwiseProduct(pg));
    out.pi_f_g += w * calc.apply(detail::phi_fn(D, t), pf.cwiseProduct(qg));
  }
  return out;
}

/// Pi_g(f) = int_0^inf P_t(Q_t f . P_t g) dt/t.
inline Field paraproduct_pi_g(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                              const QuadratureGrid& grid, std::vector<std::string>* warnings = nullptr) {
  detail::note_grid(calc, grid, warnings);
  Field out = Field::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field qf = calc.apply(detail::psi_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    out += grid.weight(k) * calc.apply(detail::phi_fn(D, t), qf.cwiseProduct(pg));
  }
  return out;
}

/// Pi(f,g) = int_0^inf Q_t(P_t f . P_t g) dt/t.
inline Field resonant_pi(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                         const QuadratureGrid& grid, std::vector<std::string>* warnings = nullptr) {
  detail::note_grid(calc, grid, warnings);
  Field out = Field::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field pf = calc.apply(detail::phi_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    out += grid.weight(k) * calc.apply(detail::psi_fn(D, t), pf.cwiseProduct(pg));
  }
  return out;
}

/// The resonant term and the three integrals of its carre du champ splitting:
/// Pi = first + second - 2 pi_gamma.
struct CarreSplitTerms {
  Field resonant;
  Field first;     ///< int Qt~(tLP_t f . P_t g) dt/t
  Field second;    ///< int Qt~(P_t f . tLP_t g) dt/t
  Field pi_gamma;  ///< int Qt~(t Gamma(P_t f, P_t g)) dt/t
};

inline CarreSplitTerms carre_split_terms(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                                         const QuadratureGrid& grid, std::vector<std::string>* warnings = nullptr) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  detail::note_grid(calc, grid, warnings);
  const Index n = calc.size();
  CarreSplitTerms out{Field::Zero(n), Field::Zero(n), Field::Zero(n), Field::Zero(n)};
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k), w = grid.weight(k);
    const Field pf = calc.apply(detail::phi_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    const Field lpf = calc.apply(detail::tlp_fn(D, t), f);
    const Field lpg = calc.apply(detail::tlp_fn(D, t), g);
    out.resonant += w * calc.apply(detail::psi_fn(D, t), pf.cwiseProduct(pg));
    out.first += w * calc.apply(detail::tilde_fn(D, t), lpf.cwiseProduct(pg));
    out.second += w * calc.apply(detail::tilde_fn(D, t), pf.cwiseProduct(lpg));
    out.pi_gamma += w * calc.apply(detail::tilde_fn(D, t), t * gamma(gen, pf, pg));
  }
  return out;
}

/// Pi_Gamma(f,g) = int_0^inf Qt~ Gamma(sqrt(t) P_t f, sqrt(t) P_t g) dt/t.
inline Field pi_gamma(const SpectralCalculus& calc, const Field& f, const Field& g, int D, const QuadratureGrid& grid,
                      std::vector<std::string>* warnings = nullptr) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  detail::note_grid(calc, grid, warnings);
  Field out = Field::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field pf = calc.apply(detail::phi_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    out += grid.weight(k) * calc.apply(detail::tilde_fn(D, t), t * gamma(gen, pf, pg));
  }
  return out;
}

/// int_0^inf Qt~(tLP_t f . P_t g) dt/t, the first term of the splitting.
inline Field split_first_term(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                              const QuadratureGrid& grid) {
  Field out = Field::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field lpf = calc.apply(detail::tlp_fn(D, t), f);
    const Field pg = calc.apply(detail::phi_fn(D, t), g);
    out += grid.weight(k) * calc.apply(detail::tilde_fn(D, t), lpf.cwiseProduct(pg));
  }
  return out;
}

struct DecompositionReport {
  Field pi_resonant, pi_g_f, pi_f_g;
  double residual_p = 0.0;
  double residual_refined = 0.0;
  /// NaN when the generator carries no carre du champ
  double carre_split_residual = std::nan("");
  /// log2 of the residual ratio under node doubling
  double quadrature_order_estimate = 0.0;
  double p = 2.0;
  std::vector<std::string> warnings;
};

inline double relative_product_residual(const SpectralCalculus& calc, const Field& fg, const ProductTerms& t,
                                        double p) {
  return lp_norm(calc.mu(), fg - t.resonant - t.pi_g_f - t.pi_f_g, p) / lp_norm(calc.mu(), fg, p);
}

/// ||Pi - [first + second - 2 Pi_Gamma]||_p / ||fg||_p.
inline double carre_split_check(const SpectralCalculus& calc, const Field& f, const Field& g, int D,
                                const QuadratureGrid& grid, double p = 2.0,
                                std::vector<std::string>* warnings = nullptr) {
  const Field fg = f.cwiseProduct(g);
  const double denom = lp_norm(calc.mu(), fg, p);
  require(denom >= 1e-14, ErrorKind::degenerate_sample, "||fg||_p vanishes");
  const auto s = carre_split_terms(calc, f, g, D, grid, warnings);
  return lp_norm(calc.mu(), s.resonant - (s.first + s.second - 2.0 * s.pi_gamma), p) / denom;
}

inline DecompositionReport decomposition_residual(const SpectralCalculus& calc, const Field& f, const Field& g,
                                                  int D, const QuadratureGrid& grid, double p) {
  const Field fg = f.cwiseProduct(g);
  require(lp_norm(calc.mu(), fg, p) >= 1e-14, ErrorKind::degenerate_sample, "||fg||_p vanishes");
  DecompositionReport rep;
  rep.p = p;
  auto terms = product_terms(calc, f, g, D, grid, &rep.warnings);
  rep.residual_p = relative_product_residual(calc, fg, terms, p);
  const auto fine = product_terms(calc, f, g, D, grid.refined());
  rep.residual_refined = relative_product_residual(calc, fg, fine, p);
  rep.quadrature_order_estimate =
      rep.residual_refined > 0 ? std::log2(rep.residual_p / rep.residual_refined) : kInfinity;
  rep.pi_resonant = std::move(terms.resonant);
  rep.pi_g_f = std::move(terms.pi_g_f);
  rep.pi_f_g = std::move(terms.pi_f_g);
  if (calc.generator().has_gamma) rep.carre_split_residual = carre_split_check(calc, f, g, D, grid, p);
  return rep;
}

/// ||L^{alpha/2} f||_p, a seminorm modulo N(L).
inline double sobolev_norm(const SpectralCalculus& calc, const Field& f, double p, double alpha,
                           double* kernel_norm = nullptr) {
  require(alpha > 0 && alpha <= 1, ErrorKind::parameter, "smoothness alpha must lie in (0,1]");
  const auto d = calc.frac_power(alpha / 2, f);
  if (kernel_norm) *kernel_norm = d.kernel_norm;
  return lp_norm(calc.mu(), d.value, p);
}

struct LeibnizValue {
  double ratio = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  /// L^2 norm of the kernel component of fg removed by the fractional power
  double product_kernel_norm = 0.0;
};

/// ||fg||_{p,alpha} / (||f||_{p,alpha} ||g||_inf + ||f||_inf ||g||_{p,alpha}).
inline LeibnizValue leibniz_terms(const SpectralCalculus& calc, const Field& f, const Field& g, double p,
                                  double alpha) {
  LeibnizValue v;
  v.numerator = sobolev_norm(calc, f.cwiseProduct(g), p, alpha, &v.product_kernel_norm);
  v.denominator = sobolev_norm(calc, f, p, alpha) * sup_norm(g) + sup_norm(f) * sobolev_norm(calc, g, p, alpha);
  // rounding floor: sobolev norms of kernel fields are O(eps) of this scale
  const double scale = sup_norm(f) * sup_norm(g) * std::pow(std::max(calc.lambda_max(), 1e-300), alpha / 2) *
                       lp_norm(calc.mu(), Field::Ones(calc.size()), p);
  require(v.denominator > 1e-12 * scale, ErrorKind::degenerate_sample, "Leibniz denominator vanishes");
  v.ratio = v.numerator / v.denominator;
  return v;
}

inline double leibniz_ratio(const SpectralCalculus& calc, const Field& f, const Field& g, double p, double alpha) {
  return leibniz_terms(calc, f, g, p, alpha).ratio;
}

}  // namespace paralab
