#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"
#include "paralab/norm_estimation.hpp"
#include "paralab/operators.hpp"
#include "paralab/quadrature.hpp"
#include "paralab/space.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace paralab {

struct EstimateReport {
  std::string name;
  std::map<std::string, double> constants;
  Index violations = 0;
  std::map<std::string, double> window;
  Index samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
  /// optional per-row table for CSV output
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline bool is_metzler(const Generator& gen) {
  if (gen.matrix.imag().cwiseAbs().maxCoeff() != 0.0) return false;
  for (Index i = 0; i < gen.size(); ++i)
    for (Index j = 0; j < gen.size(); ++j)
      if (i != j && gen.matrix(i, j).real() > 0.0) return false;
  return true;
}

/// Dense e^{-tL}: the positive series when L is a real Metzler-negated matrix
/// (entrywise accurate), the spectral factorization otherwise.
inline CMat semigroup_matrix(const SpectralCalculus& calc, double t, bool* positive = nullptr) {
  const bool pos = is_metzler(calc.generator());
  if (positive) *positive = pos;
  if (pos) return positive_semigroup_matrix(calc.generator(), t).cast<Complex>();
  return calc.matrix_function([t](Complex z) { return std::exp(-t * z); });
}

inline std::vector<double> log_spaced(double a, double b, Index count) {
  require(a > 0 && b >= a && count >= 1, ErrorKind::parameter, "invalid log-spaced window");
  std::vector<double> out;
  if (count == 1 || a == b) return {a};
  for (Index k = 0; k < count; ++k)
    out.push_back(std::exp(std::log(a) + (std::log(b) - std::log(a)) * static_cast<double>(k) / (count - 1)));
  out.back() = b;
  return out;
}

}  // namespace detail

struct UeOptions {
  double t_min = 0.0;  ///< 0 selects scale_h^2
  double t_max = 0.0;  ///< 0 selects diameter^2
  Index t_count = 8;
  double c_max = 1e6;
};

/// Smallest C >= 1 with |p_t(x,y)| <= C V(x,sqrt t)^{-1} exp(-d^2/(C t)) for all
/// (t, x, y) on the window. The bound is increasing in C, so each pair that
/// fails at the running C raises it by bisection; C is a max over pairs.
inline EstimateReport fit_ue(const SpectralCalculus& calc, const UeOptions& opt = {}) {
  const MetricMeasureSpace& space = calc.space();
  const double h2 = space.scale_h() * space.scale_h();
  const double d2 = space.diameter() * space.diameter();
  const double t_lo = opt.t_min > 0 ? opt.t_min : h2;
  const double t_hi = opt.t_max > 0 ? opt.t_max : d2;
  require(t_lo >= h2 * (1 - 1e-12), ErrorKind::parameter, "UE window starts below scale_h^2");
  require(t_hi <= d2 * (1 + 1e-12) && t_hi >= t_lo, ErrorKind::parameter, "UE window must lie in [h^2, diam^2]");
  EstimateReport rep;
  rep.name = "ue";
  rep.window = {{"t_min", t_lo}, {"t_max", t_hi}, {"t_count", static_cast<double>(opt.t_count)}};
  const Index n = space.size();
  const RVec& mu = space.mu();
  const auto ts = detail::log_spaced(t_lo, t_hi, opt.t_count);
  // log|p| + log V - log C + d^2/(C t) <= 0 is the pass condition
  auto excess = [](double logpv, double a, double C) { return logpv - std::log(C) + a / C; };
  std::vector<std::pair<CMat, RVec>> kernels;
  double C = 1.0;
  bool failed = false, positive = false;
  for (double t : ts) {
    CMat K = detail::semigroup_matrix(calc, t, &positive);
    RVec vol(n);
    for (Index x = 0; x < n; ++x) vol(x) = space.volume(x, std::sqrt(t));
    for (Index y = 0; y < n; ++y) {
      for (Index x = 0; x < n; ++x) {
        const double pk = std::abs(K(x, y)) / mu(y);
        ++rep.samples;
        if (pk == 0.0) continue;
        const double logpv = std::log(pk * vol(x));
        const double a = space.dist(x, y) * space.dist(x, y) / t;
        if (excess(logpv, a, C) <= 1e-12) continue;
        if (excess(logpv, a, opt.c_max) > 1e-12) {
          failed = true;
          C = opt.c_max;
          continue;
        }
        double lo = C, hi = opt.c_max;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
          const double mid = std::sqrt(lo * hi);
          (excess(logpv, a, mid) <= 1e-12 ? hi : lo) = mid;
        }
        C = hi;
      }
    }
    kernels.emplace_back(std::move(K), std::move(vol));
  }
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const auto& [K, vol] = kernels[k];
    for (Index y = 0; y < n; ++y)
      for (Index x = 0; x < n; ++x) {
        const double pk = std::abs(K(x, y)) / mu(y);
        if (pk == 0.0) continue;
        const double a = space.dist(x, y) * space.dist(x, y) / ts[k];
        if (excess(std::log(pk * vol(x)), a, C) > 1e-12) ++rep.violations;
      }
  }
  rep.constants["C"] = failed ? kInfinity : C;
  if (failed) rep.notes.push_back("no finite C below c_max; fit failure");
  rep.notes.push_back(positive ? "kernel from positive series" : "kernel from spectral factorization");
  return rep;
}

struct BallPair {
  Index x1 = 0, x2 = 0;
  double r = 1.0;
};

/// Pairs of balls of radius r centered at base and base + s steps along the
/// first grid axis, for every r and separation s (in units of h).
inline std::vector<BallPair> grid_ball_pairs(const MetricMeasureSpace& space, const std::vector<double>& radii,
                                             const std::vector<Index>& separations, Index base) {
  require(space.grid().has_value(), ErrorKind::parameter, "grid ball pairs need a grid space");
  const auto& geo = *space.grid();
  std::vector<BallPair> out;
  for (double r : radii)
    for (Index s : separations) {
      require(base + s < geo.dims[0], ErrorKind::parameter, "separation leaves the grid");
      out.push_back({base, base + s, r});
    }
  return out;
}

struct DgOptions {
  Index samples = 64;
  std::uint64_t seed = 7;
};

inline double set_distance(const MetricMeasureSpace& space, const IndexSet& a, const IndexSet& b) {
  double d = kInfinity;
  for (Index x : a)
    for (Index y : b) d = std::min(d, space.dist(x, y));
  return d;
}

/// Davies-Gaffney decay: restricted norms of e^{-r^2 L} and r Gamma e^{-r^2 L}
/// from L^2(B1) to L^2(B2), regressed on d(B1,B2)^2 / r^2.
inline EstimateReport davies_gaffney(const SpectralCalculus& calc, const std::vector<BallPair>& pairs,
                                     const DgOptions& opt = {}) {
  const MetricMeasureSpace& space = calc.space();
  const Generator& gen = calc.generator();
  const RVec& mu = space.mu();
  EstimateReport rep;
  rep.name = "davies_gaffney";
  rep.seed = opt.seed;
  rep.columns = {"r", "x1", "x2", "d2_over_r2", "semigroup_norm", "gamma_norm"};
  std::map<double, CMat> cache;
  std::vector<double> xs, ys, gx, gy;
  bool positive = false;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs[k];
    require(pr.r > 0, ErrorKind::parameter, "ball radius must be positive");
    const double t = pr.r * pr.r;
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, detail::semigroup_matrix(calc, t, &positive)).first;
    const CMat& K = it->second;
    const IndexSet b1 = ball(space, pr.x1, pr.r), b2 = ball(space, pr.x2, pr.r);
    const double d = set_distance(space, b1, b2);
    const double q = d * d / t;
    CMat blk(b2.size(), b1.size());
    for (std::size_t i = 0; i < b2.size(); ++i)
      for (std::size_t j = 0; j < b1.size(); ++j)
        blk(Index(i), Index(j)) = std::sqrt(mu(b2[i])) * K(b2[i], b1[j]) / std::sqrt(mu(b1[j]));
    Eigen::JacobiSVD<CMat> svd(blk);
    const double sg = svd.singularValues()(0);
    double gn = std::nan("");
    if (gen.has_gamma) {
      const Index n = space.size();
      auto embed = [&](const Field& v) {
        Field f = Field::Zero(n);
        for (std::size_t j = 0; j < b1.size(); ++j) f(b1[j]) = v(Index(j));
        return f;
      };
      RVec mu1(b1.size()), mu2(b2.size());
      for (std::size_t j = 0; j < b1.size(); ++j) mu1(Index(j)) = mu(b1[j]);
      for (std::size_t i = 0; i < b2.size(); ++i) mu2(Index(i)) = mu(b2[i]);
      FieldMap map = [&](const Field& v) {
        const RVec gl = gamma_len(gen, K * embed(v));
        Field out(Index(b2.size()));
        for (std::size_t i = 0; i < b2.size(); ++i) out(Index(i)) = pr.r * gl(b2[i]);
        return out;
      };
      NormEstimateOptions no;
      no.samples = opt.samples;
      no.seed = opt.seed + k;
      no.real_samples = true;
      gn = estimate_map_norm(map, mu1, mu2, 2.0, no).value;
    }
    rep.rows.push_back({pr.r, double(pr.x1), double(pr.x2), q, sg, gn});
    if (sg > 0) {
      xs.push_back(q);
      ys.push_back(std::log(sg));
    }
    if (gn > 0) {
      gx.push_back(q);
      gy.push_back(std::log(gn));
    }
  }
  rep.samples = static_cast<Index>(pairs.size());
  require(xs.size() >= 3, ErrorKind::insufficient_data, "Davies-Gaffney fit needs at least 3 usable pairs");
  const auto fit = fit_line(xs, ys);
  rep.constants["slope"] = fit.slope;
  rep.constants["intercept"] = fit.intercept;
  rep.constants["r_squared"] = fit.r_squared;
  if (gen.has_gamma) {
    require(gx.size() >= 3, ErrorKind::insufficient_data, "Gamma Davies-Gaffney fit needs at least 3 usable pairs");
    const auto gfit = fit_line(gx, gy);
    rep.constants["gamma_slope"] = gfit.slope;
    rep.constants["gamma_intercept"] = gfit.intercept;
    rep.constants["gamma_r_squared"] = gfit.r_squared;
  }
  if (fit.slope >= 0) ++rep.violations;
  rep.notes.push_back(positive ? "kernel from positive series" : "kernel from spectral factorization");
  rep.notes.push_back("Gamma family norms are lower-bound estimates");
  return rep;
}

/// ||e^{-r^2 L}||_{L^2 -> L^2} on the kernel-free subspace, B1 = B2 = M.
inline double semigroup_norm_kernel_free(const SpectralCalculus& calc, double r) {
  const CMat T = calc.matrix_function([r](Complex z) { return std::exp(-r * r * z); }, true);
  const RVec s = calc.mu().cwiseSqrt();
  Eigen::JacobiSVD<CMat> svd(s.asDiagonal() * T * s.cwiseInverse().asDiagonal());
  return svd.singularValues()(0);
}

/// Real white noise smoothed by e^{-sL}, s log-uniform over the spectral
/// window, so draws cover every frequency band.
inline FieldSampler multiscale_sampler(const SpectralCalculus& calc) {
  const double lo = std::log(0.1 / calc.lambda_max());
  const double hi = std::log(10.0 / std::max(calc.lambda_min_nonzero(), 1e-300));
  return [&calc, lo, hi](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double s = std::exp(lo + (hi - lo) * u(rng));
    const Field f = random_real(calc.size(), rng).cast<Complex>();
    return Field(calc.semigroup(s, f).real().cast<Complex>());
  };
}

struct GradientOptions {
  Index samples = 1000;
  std::uint64_t seed = 11;
  int climb_iterations = 120;
};

/// Lower-bound estimate of sup_t ||sqrt(t) Gamma e^{-tL}||_{p -> p}.
inline EstimateReport gradient_bound(const SpectralCalculus& calc, double p, const std::vector<double>& t_grid,
                                     const GradientOptions& opt = {}) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  require(p > 1.0, ErrorKind::parameter, "gradient bound needs p > 1");
  EstimateReport rep;
  rep.name = "gradient_bound";
  rep.seed = opt.seed;
  rep.columns = {"t", "estimate", "exact_p2"};
  const bool exact_available = p == 2.0 && gen.self_adjoint && gen.conservative;
  double sup = 0.0, arg = 0.0, exact_sup = 0.0;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    require(t > 0, ErrorKind::parameter, "t-grid entries must be positive");
    const CMat S = calc.matrix_function([t](Complex z) { return std::exp(-t * z); });
    FieldMap map = [&](const Field& f) { return Field((std::sqrt(t) * gamma_len(gen, S * f)).cast<Complex>()); };
    NormEstimateOptions no;
    no.samples = opt.samples;
    no.seed = opt.seed + k;
    no.climb_iterations = opt.climb_iterations;
    no.real_samples = true;
    const double v = estimate_map_norm(map, calc.mu(), p, no, multiscale_sampler(calc)).value;
    double ex = std::nan("");
    if (exact_available) {
      ex = 0.0;
      for (Index i = 0; i < calc.eigenvalues().size(); ++i) {
        const double lam = calc.eigenvalues()(i).real();
        ex = std::max(ex, std::sqrt(t * lam) * std::exp(-t * lam));
      }
      exact_sup = std::max(exact_sup, ex);
      if (v > ex * (1 + 1e-6)) ++rep.violations;
    }
    rep.rows.push_back({t, v, ex});
    if (v > sup) {
      sup = v;
      arg = t;
    }
    rep.samples += opt.samples;
  }
  rep.constants["sup_estimate"] = sup;
  rep.constants["argmax_t"] = arg;
  rep.constants["p"] = p;
  if (exact_available) rep.constants["exact_p2_sup"] = exact_sup;
  rep.notes.push_back("estimates are lower bounds");
  return rep;
}

/// int_0^inf |s^alpha phi_N(s)|^2 ds/s in closed form.
inline double vertical_square_scalar(double alpha, int N) {
  double s = 0.0;
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < N; ++k) {
      const double e = 2 * alpha + j + k;
      s += std::exp(std::lgamma(e) - e * std::log(2.0) - std::lgamma(j + 1.0) - std::lgamma(k + 1.0));
    }
  return s;
}

/// ||(int |(tL)^alpha P_t^{(N)} f|^2 dt/t)^{1/2}||_p / ||f||_p.
inline double vertical_square_function(const SpectralCalculus& calc, const Field& f, double alpha, int N, double p,
                                       const QuadratureGrid& grid) {
  require(alpha > 0, ErrorKind::parameter, "alpha must be positive");
  require(N >= 1, ErrorKind::parameter, "order N must be positive");
  const double nf = lp_norm(calc.mu(), f, p);
  require(nf > 0, ErrorKind::degenerate_sample, "||f||_p vanishes");
  RVec acc = RVec::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field v = calc.apply(
        [t, alpha, N](Complex z) {
          const Complex s = t * z;
          return std::abs(s) == 0 ? Complex(0.0) : std::pow(s, alpha) * phi_N(N, s);
        },
        f);
    acc += grid.weight(k) * v.cwiseAbs2();
  }
  return lp_norm(calc.mu(), acc.cwiseSqrt().cast<Complex>(), p) / nf;
}

/// ||(int |sqrt(t) Gamma (tL)^{-alpha/2} P_t^{(N)} f|^2 dt/t)^{1/2}||_p / ||f||_p.
inline double gamma_square_function(const SpectralCalculus& calc, const Field& f, double alpha, int N, double p,
                                    const QuadratureGrid& grid) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  require(alpha > 0 && alpha < 1, ErrorKind::parameter, "alpha must lie in (0,1)");
  require(N >= 1, ErrorKind::parameter, "order N must be positive");
  const double nf = lp_norm(calc.mu(), f, p);
  require(nf > 0, ErrorKind::degenerate_sample, "||f||_p vanishes");
  RVec acc = RVec::Zero(calc.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field u = calc.apply(
        [t, alpha, N](Complex z) { return std::pow(Complex(t) * z, -alpha / 2) * phi_N(N, Complex(t) * z); }, f,
        true);
    acc += grid.weight(k) * t * gamma(gen, u, u).cwiseAbs();
  }
  return lp_norm(calc.mu(), acc.cwiseSqrt().cast<Complex>(), p) / nf;
}

/// F(t_k, x) on the nodes of a quadrature grid.
struct TimeField {
  QuadratureGrid grid;
  CMat values;  ///< rows: t-nodes, columns: points
};

/// F(t,x) = sqrt(t) Gamma(P_t f)(x), the field used in the tent-space estimates.
inline TimeField sqrt_t_gamma_pt(const SpectralCalculus& calc, const Field& f, int N, const QuadratureGrid& grid) {
  const Generator& gen = calc.generator();
  require(gen.has_gamma, ErrorKind::unsupported_operator, "generator has no carre du champ form");
  TimeField F{grid, CMat(grid.size(), calc.size())};
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Field u = calc.p_t(N, t, f);
    F.values.row(k) = (std::sqrt(t) * gamma_len(gen, u)).cast<Complex>().transpose();
  }
  return F;
}

/// ||x -> (sum_k w_k avg_{B(x, a sqrt t_k)} |F_k|^2)^{1/2}||_p; x always belongs
/// to its own ball.
inline double tent_norm(const MetricMeasureSpace& space, const TimeField& F, double p, double a) {
  require(a >= 1, ErrorKind::parameter, "tent angle must be at least 1");
  require(F.values.rows() == F.grid.size() && F.values.cols() == space.size(), ErrorKind::size,
          "time field does not match grid and space");
  const Index n = space.size();
  const RVec& mu = space.mu();
  const RMat mag = F.values.cwiseAbs2();
  RVec area = RVec::Zero(n);
  for (Index x = 0; x < n; ++x) {
    for (Index k = 0; k < F.grid.size(); ++k) {
      const double r = a * std::sqrt(F.grid.node(k));
      double s = 0.0, v = 0.0;
      for (Index y = 0; y < n; ++y)
        if (y == x || space.dist(x, y) < r) {
          s += mag(k, y) * mu(y);
          v += mu(y);
        }
      area(x) += F.grid.weight(k) * s / v;
    }
  }
  return lp_norm(mu, area.cwiseSqrt().cast<Complex>(), p);
}

/// tent_norm(F, p, 2^j) / (2^{j nu/2} tent_norm(F, p, 1)).
inline double change_of_angle_ratio(const MetricMeasureSpace& space, const TimeField& F, double p, int j, double nu) {
  require(j >= 0, ErrorKind::parameter, "angle exponent must be nonnegative");
  const double base = tent_norm(space, F, p, 1.0);
  require(base > 0, ErrorKind::degenerate_sample, "tent norm vanishes");
  if (j == 0) return base / base;
  return tent_norm(space, F, p, std::ldexp(1.0, j)) / (std::pow(2.0, j * nu / 2) * base);
}

struct ImaginaryPowerOptions {
  Index samples = 200;
  std::uint64_t seed = 13;
  int climb_iterations = 120;
};

/// Norms of L^{i eta} on kernel-free L^p fields and the fitted growth exponent s
/// in ||L^{i eta}|| ~ (1 + |eta|)^s.
inline EstimateReport imaginary_power_growth(const SpectralCalculus& calc, double p, const std::vector<double>& etas,
                                             const ImaginaryPowerOptions& opt = {}) {
  require(!etas.empty(), ErrorKind::parameter, "eta grid is empty");
  {
    auto sorted = etas;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      require(std::abs(sorted[i] + sorted[sorted.size() - 1 - i]) <= 1e-12 * (1 + std::abs(sorted[i])),
              ErrorKind::parameter, "eta grid must be symmetric about 0");
  }
  EstimateReport rep;
  rep.name = "imaginary_power";
  rep.seed = opt.seed;
  rep.columns = {"eta", "norm"};
  const CMat proj = CMat::Identity(calc.size(), calc.size()) - calc.kernel_projector();
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < etas.size(); ++k) {
    const double eta = etas[k];
    const CMat T = calc.matrix_function([eta](Complex z) { return std::exp(Complex(0.0, eta) * std::log(z)); }, true);
    double v;
    if (p == 2.0 && calc.generator().self_adjoint) {
      NormEstimateOptions no;
      v = estimate_matrix_norm(T * proj, calc.mu(), 2.0, no).value;
    } else {
      NormEstimateOptions no;
      no.samples = opt.samples;
      no.seed = opt.seed + k;
      no.climb_iterations = opt.climb_iterations;
      FieldMap map = [&T](const Field& f) { return Field(T * f); };
      FieldMap project = [&proj](const Field& f) { return Field(proj * f); };
      v = estimate_map_norm(map, calc.mu(), p, no, {}, project).value;
    }
    rep.rows.push_back({eta, v});
    xs.push_back(std::log1p(std::abs(eta)));
    ys.push_back(std::log(v));
    rep.samples += opt.samples;
  }
  const auto fit = fit_line(xs, ys);
  rep.constants["s"] = fit.slope;
  rep.constants["intercept"] = fit.intercept;
  rep.constants["r_squared"] = fit.r_squared;
  rep.constants["p"] = p;
  rep.notes.push_back(p == 2.0 && calc.generator().self_adjoint ? "p = 2 norms are exact"
                                                                : "norms are lower-bound estimates");
  return rep;
}

}  // namespace paralab
