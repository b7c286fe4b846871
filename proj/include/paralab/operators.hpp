#pragma once

#include "paralab/core.hpp"
#include "paralab/space.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace paralab {

/// One summand coeff * (f[fa] - f[fb]) * (g[ga] - g[gb]) of Gamma(f,g)(point).
struct GammaTerm {
  Index point = 0;
  Index fa = 0, fb = 0, ga = 0, gb = 0;
  double coeff = 0.0;
};

enum class GeneratorKind { graph_laplacian, divergence_form, delta_a, custom };

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::graph_laplacian: return "graph_laplacian";
    case GeneratorKind::divergence_form: return "divergence_form";
    case GeneratorKind::delta_a: return "delta_a";
    case GeneratorKind::custom: return "custom";
  }
  return "unknown";
}

/// The operator L as a dense matrix in the mu-weighted pairing, with an
/// optional bilinear carre du champ form. Built once, never mutated.
struct Generator {
  SpacePtr space;
  CMat matrix;
  std::vector<GammaTerm> gamma_terms;
  GeneratorKind kind = GeneratorKind::custom;
  bool has_gamma = false;
  bool self_adjoint = false;
  bool conservative = false;
  double accretivity_angle = 0.0;

  Index size() const { return matrix.rows(); }
  double norm() const { return matrix_inf_norm(matrix); }
  Field apply(const Field& f) const { return matrix * f; }
};

using GeneratorPtr = std::shared_ptr<const Generator>;

/// mu-weighted adjoint M^{-1} L^* M.
inline CMat mu_adjoint(const CMat& L, const RVec& mu) {
  return mu.cwiseInverse().asDiagonal() * L.adjoint() * mu.asDiagonal();
}

namespace detail {

inline void set_structural_flags(Generator& gen) {
  const double scale = std::max(gen.norm(), 1e-300);
  const CMat adj = mu_adjoint(gen.matrix, gen.space->mu());
  gen.self_adjoint = matrix_inf_norm(gen.matrix - adj) <= 1e-12 * scale;
  const CVec ones = CVec::Ones(gen.size());
  gen.conservative = sup_norm(gen.matrix * ones) <= 1e-12 * scale;
}

}  // namespace detail

/// Pointwise bilinear carre du champ (no conjugation).
inline Field gamma(const Generator& gen, const Field& f, const Field& g) {
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  require(f.size() == gen.size() && g.size() == gen.size(), ErrorKind::parameter, "field length mismatch");
  Field out = Field::Zero(gen.size());
  for (const auto& t : gen.gamma_terms) out(t.point) += t.coeff * (f(t.fa) - f(t.fb)) * (g(t.ga) - g(t.gb));
  return out;
}

/// |Gamma(f,f)|^{1/2} pointwise.
inline RVec gamma_len(const Generator& gen, const Field& f) {
  return gamma(gen, f, f).cwiseAbs().cwiseSqrt();
}

inline double estimate_accretivity_angle(const Generator& gen, Index samples, std::uint64_t seed);

/// (Lf)(x) = mu(x)^{-1} sum_y w_xy (f(x) - f(y)),
/// Gamma(f,g)(x) = (2 mu(x))^{-1} sum_y w_xy (f(x)-f(y)) (g(x)-g(y)).
inline GeneratorPtr graph_laplacian(SpacePtr space, const std::vector<Edge>& edges) {
  const Index n = space->size();
  for (const auto& e : edges) {
    require(e.i >= 0 && e.j >= 0 && e.i < n && e.j < n && e.i != e.j, ErrorKind::parameter,
            "invalid edge endpoints");
    require(e.weight > 0 && std::isfinite(e.weight), ErrorKind::parameter, "edge weights must be positive");
  }
  require(is_connected(n, edges), ErrorKind::connectivity, "graph is disconnected");
  auto gen = std::make_shared<Generator>();
  gen->space = space;
  gen->kind = GeneratorKind::graph_laplacian;
  gen->matrix = CMat::Zero(n, n);
  const RVec& mu = space->mu();
  for (const auto& e : edges) {
    gen->matrix(e.i, e.i) += e.weight / mu(e.i);
    gen->matrix(e.i, e.j) -= e.weight / mu(e.i);
    gen->matrix(e.j, e.j) += e.weight / mu(e.j);
    gen->matrix(e.j, e.i) -= e.weight / mu(e.j);
    gen->gamma_terms.push_back({e.i, e.i, e.j, e.i, e.j, e.weight / (2 * mu(e.i))});
    gen->gamma_terms.push_back({e.j, e.j, e.i, e.j, e.i, e.weight / (2 * mu(e.j))});
  }
  gen->has_gamma = true;
  detail::set_structural_flags(*gen);
  gen->accretivity_angle = 0.0;
  return gen;
}

/// Graph Laplacian on the space's own edges (graph spaces) or lattice edges (grids).
inline GeneratorPtr graph_laplacian(SpacePtr space) {
  if (!space->edges().empty()) return graph_laplacian(space, space->edges());
  require(space->grid().has_value(), ErrorKind::parameter, "space carries neither edges nor a lattice");
  return graph_laplacian(space, lattice_edges(*space->grid()));
}

struct EllipticityReport {
  double lambda_low = 0.0;
  double Lambda_high = 0.0;
  Index violations = 0;
  bool valid() const { return violations == 0; }
};

/// lambda_low: min smallest eigenvalue of the Hermitian part; Lambda_high: max operator norm.
inline EllipticityReport check_ellipticity(const std::vector<CMat>& A) {
  EllipticityReport rep;
  rep.lambda_low = kInfinity;
  for (const auto& a : A) {
    require(a.rows() == a.cols() && a.rows() >= 1, ErrorKind::parameter, "coefficients must be square");
    const CMat herm = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(herm, Eigen::EigenvaluesOnly);
    const double low = es.eigenvalues().minCoeff();
    Eigen::JacobiSVD<CMat> svd(a);
    rep.lambda_low = std::min(rep.lambda_low, low);
    rep.Lambda_high = std::max(rep.Lambda_high, svd.singularValues()(0));
    if (!(low > 0)) ++rep.violations;
  }
  if (A.empty()) rep.lambda_low = 0.0;
  return rep;
}

/// L = (grad_h)^{*mu} A grad_h with forward differences and natural boundary;
/// Gamma(f,g)(x) = grad_h f(x)^T Re((A(x)+A(x)^T)/2) grad_h g(x), evaluated on
/// the cell anchored at x.
inline GeneratorPtr divergence_form(SpacePtr space, const std::vector<CMat>& A) {
  require(space->grid().has_value(), ErrorKind::parameter, "divergence form needs a grid space");
  const GridGeometry& geo = *space->grid();
  const Index n = space->size();
  const Index d = geo.dim();
  require(static_cast<Index>(A.size()) == n, ErrorKind::parameter, "need one coefficient matrix per cell");
  for (const auto& a : A)
    require(a.rows() == d && a.cols() == d, ErrorKind::parameter, "coefficient matrices must be dim x dim");
  const auto ell = check_ellipticity(A);
  require(ell.valid(), ErrorKind::ellipticity,
          std::to_string(ell.violations) + " cells violate ellipticity (lambda_low=" +
              std::to_string(ell.lambda_low) + ")");

  auto gen = std::make_shared<Generator>();
  gen->space = space;
  gen->kind = GeneratorKind::divergence_form;
  gen->matrix = CMat::Zero(n, n);
  const RVec& mu = space->mu();
  const double h = geo.h;
  const double cell_measure = std::pow(h, static_cast<double>(d));
  for (Index x = 0; x < n; ++x) {
    std::vector<std::optional<Index>> fwd(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) fwd[static_cast<std::size_t>(k)] = geo.forward(x, k);
    const CMat& a = A[static_cast<std::size_t>(x)];
    const RMat sym = (0.5 * (a + a.transpose())).real();
    for (Index k = 0; k < d; ++k) {
      const auto& fk = fwd[static_cast<std::size_t>(k)];
      if (!fk) continue;
      for (Index l = 0; l < d; ++l) {
        const auto& fl = fwd[static_cast<std::size_t>(l)];
        if (!fl) continue;
        // contribution of (grad_k row) A_kl (grad_l column) on this cell
        const Complex c = a(k, l) * cell_measure / (h * h);
        const Index ra[2] = {*fk, x};
        const double sa[2] = {1.0, -1.0};
        const Index cb[2] = {*fl, x};
        const double sb[2] = {1.0, -1.0};
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) gen->matrix(ra[i], cb[j]) += sa[i] * sb[j] * c / mu(ra[i]);
        if (sym(k, l) != 0.0) gen->gamma_terms.push_back({x, *fk, x, *fl, x, sym(k, l) / (h * h)});
      }
    }
  }
  gen->has_gamma = true;
  detail::set_structural_flags(*gen);
  gen->accretivity_angle = gen->self_adjoint ? 0.0 : estimate_accretivity_angle(*gen, 256, 0xacc);
  return gen;
}

/// Divergence form with the same coefficient matrix on every cell.
inline GeneratorPtr divergence_form(SpacePtr space, const CMat& A) {
  return divergence_form(space, std::vector<CMat>(static_cast<std::size_t>(space->size()), A));
}

/// L f = -Delta_h(a f) with Delta_h the lattice Laplacian; no carre du champ.
inline GeneratorPtr nondivergence_delta_a(SpacePtr space, const Field& a) {
  require(space->grid().has_value(), ErrorKind::parameter, "delta_a generator needs a grid space");
  require(a.size() == space->size() && a.allFinite(), ErrorKind::parameter, "coefficient length mismatch");
  require(a.real().minCoeff() > 0, ErrorKind::accretivity, "Re a must be uniformly positive");
  const auto lap = graph_laplacian(space, lattice_edges(*space->grid()));
  auto gen = std::make_shared<Generator>();
  gen->space = space;
  gen->kind = GeneratorKind::delta_a;
  gen->matrix = lap->matrix * a.asDiagonal();
  gen->has_gamma = false;
  detail::set_structural_flags(*gen);
  gen->accretivity_angle = gen->self_adjoint ? 0.0 : estimate_accretivity_angle(*gen, 256, 0xacc);
  return gen;
}

/// <u, v>_mu = sum_x u(x) conj(v(x)) mu(x).
inline Complex mu_inner(const RVec& mu, const Field& u, const Field& v) {
  Complex s = 0.0;
  for (Index i = 0; i < u.size(); ++i) s += u(i) * std::conj(v(i)) * mu(i);
  return s;
}

/// Sampled numerical-range half angle max |arg <Lf,f>_mu| with a hill-climb
/// refinement of the best draws. A lower bound for the true angle.
inline double estimate_accretivity_angle(const Generator& gen, Index samples, std::uint64_t seed) {
  const RVec& mu = gen.space->mu();
  const Index n = gen.size();
  const double floor = 1e-12 * std::max(gen.norm(), 1e-300);
  auto angle = [&](const Field& f) {
    const Complex q = mu_inner(mu, gen.apply(f), f);
    const double nf = mu_inner(mu, f, f).real();
    if (std::abs(q) <= floor * nf) return 0.0;
    return std::abs(std::arg(q));
  };
  double best = 0.0;
  Field best_f;
  for (Index s = 0; s < samples; ++s) {
    auto rng = make_rng(seed, 0xa11, static_cast<std::uint64_t>(s));
    Field f = random_complex(n, rng);
    const double a = angle(f);
    if (a > best || best_f.size() == 0) {
      best = std::max(best, a);
      best_f = f;
    }
  }
  if (best_f.size() == 0) return best;
  auto rng = make_rng(seed, 0xa12);
  double step = 0.5;
  Field f = best_f;
  double cur = angle(f);
  for (int it = 0; it < 400 && step > 1e-6; ++it) {
    const Field trial = f + step * random_complex(n, rng) * (std::sqrt(mu_inner(mu, f, f).real()) /
                                                             std::sqrt(static_cast<double>(n)));
    const double a = angle(trial);
    if (a > cur) {
      cur = a;
      f = trial;
    } else {
      step *= 0.97;
    }
  }
  return std::max(best, cur);
}

inline double check_accretivity(const Generator& gen, Index samples = 1000, std::uint64_t seed = 1) {
  return estimate_accretivity_angle(gen, samples, seed);
}

/// Defect L(fg) - Lf g - f Lg + 2 Gamma(f,g).
inline Field carre_defect(const Generator& gen, const Field& f, const Field& g) {
  const Field fg = f.cwiseProduct(g);
  return gen.apply(fg) - gen.apply(f).cwiseProduct(g) - f.cwiseProduct(gen.apply(g)) + 2.0 * gamma(gen, f, g);
}

/// Sup norm of the four terms of the strong identity, the natural scale for
/// its residual.
inline double carre_scale(const Generator& gen, const Field& f, const Field& g) {
  const Field fg = f.cwiseProduct(g);
  double s = sup_norm(gen.apply(fg));
  s = std::max(s, sup_norm(gen.apply(f).cwiseProduct(g)));
  s = std::max(s, sup_norm(f.cwiseProduct(gen.apply(g))));
  s = std::max(s, 2.0 * sup_norm(gamma(gen, f, g)));
  return s;
}

/// Relative sup-norm residual of the strong carre du champ identity.
inline double strong_carre_residual(const Generator& gen, const Field& f, const Field& g) {
  const double scale = carre_scale(gen, f, g);
  const double r = sup_norm(carre_defect(gen, f, g));
  return scale > 0 ? r / scale : r;
}

struct CauchySchwarzReport {
  double max_violation = -kInfinity;
  Index violations = 0;
  Index samples = 0;
};

/// max over real sample pairs and points of (|Gamma(f,g)| - Gamma(f) Gamma(g)) / scale,
/// scale = max_x Gamma(f)(x)Gamma(g)(x). Violations count entries above tol.
inline CauchySchwarzReport check_cauchy_schwarz(const Generator& gen, Index samples, std::uint64_t seed,
                                                double tol = 1e-12) {
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  CauchySchwarzReport rep;
  const Index n = gen.size();
  for (Index s = 0; s < samples; ++s) {
    auto rng = make_rng(seed, 0xc5, static_cast<std::uint64_t>(s));
    const Field f = random_real(n, rng).cast<Complex>();
    const Field g = s == 0 ? f : Field(random_real(n, rng).cast<Complex>());
    const RVec cross = gamma(gen, f, g).cwiseAbs();
    const RVec prod = gamma_len(gen, f).cwiseProduct(gamma_len(gen, g));
    const double scale = std::max(prod.maxCoeff(), 1e-300);
    for (Index x = 0; x < n; ++x) {
      const double v = (cross(x) - prod(x)) / scale;
      rep.max_violation = std::max(rep.max_violation, v);
      if (v > tol) ++rep.violations;
    }
    ++rep.samples;
  }
  return rep;
}

}  // namespace paralab
