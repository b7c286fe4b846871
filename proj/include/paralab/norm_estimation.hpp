#pragma once

#include "paralab/core.hpp"
#include "paralab/space.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <random>

namespace paralab {

using FieldMap = std::function<Field(const Field&)>;
using FieldSampler = std::function<Field(std::mt19937_64&)>;

struct NormEstimate {
  double value = 0.0;
  Index samples = 0;
  Index best_sample = -1;
  /// true when the value is the exact operator norm rather than a lower bound
  bool exact = false;
};

struct NormEstimateOptions {
  Index samples = 1000;
  std::uint64_t seed = 1;
  int climb_iterations = 120;
  int power_iterations = 40;
  bool real_samples = false;
};

namespace detail {

/// Refinement happens after samples 1, 2, 4, ...; every estimate for a
/// sample count S is a max over a set that only grows with S.
inline bool is_checkpoint(Index s) { return s > 0 && (s & (s - 1)) == 0; }

inline Field default_sample(Index n, bool real, std::mt19937_64& rng) {
  return real ? Field(random_real(n, rng).cast<Complex>()) : Field(random_complex(n, rng));
}

inline double dual_exponent(double p) {
  if (std::isinf(p)) return 1.0;
  if (p == 1.0) return kInfinity;
  return p / (p - 1.0);
}

/// Unit-norm dual vector of y in l^p: |y|^{p-1} sgn(y) / ||y||_p^{p-1}.
inline CVec dual_vector(const CVec& y, double p) {
  CVec z = CVec::Zero(y.size());
  const double m = y.cwiseAbs().maxCoeff();
  if (m == 0) return z;
  if (std::isinf(p)) {
    Index k = 0;
    y.cwiseAbs().maxCoeff(&k);
    z(k) = y(k) / std::abs(y(k));
    return z;
  }
  for (Index i = 0; i < y.size(); ++i) {
    const double a = std::abs(y(i));
    if (a > 0) z(i) = std::pow(a / m, p - 1.0) * (y(i) / a);
  }
  double q = dual_exponent(p);
  double zn = 0.0;
  for (Index i = 0; i < z.size(); ++i) zn += std::isinf(q) ? 0.0 : std::pow(std::abs(z(i)), q);
  zn = std::isinf(q) ? z.cwiseAbs().maxCoeff() : std::pow(zn, 1.0 / q);
  return zn > 0 ? CVec(z / zn) : z;
}

inline double lvec_norm(const CVec& v, double p) { return lp_norm(RVec::Ones(v.size()), v, p); }

}  // namespace detail

/// Lower-bound estimate of sup ||T f||_p / ||f||_p for a possibly sublinear
/// map T on L^p(mu): seeded random draws, then a random-direction ascent from
/// the best draw at each checkpoint.
inline NormEstimate estimate_map_norm(const FieldMap& map, const RVec& mu, const RVec& mu_out, double p,
                                      const NormEstimateOptions& opt, const FieldSampler& sampler = {},
                                      const FieldMap& project = {}) {
  require(p >= 1.0, ErrorKind::parameter, "p must be at least 1");
  const Index n = mu.size();
  NormEstimate est;
  auto ratio = [&](const Field& f) {
    const double d = lp_norm(mu, f, p);
    if (!(d > 1e-300)) return 0.0;
    return lp_norm(mu_out, map(f), p) / d;
  };
  auto prepare = [&](Field f) { return project ? project(f) : f; };
  Field best;
  double best_raw = -1.0;
  for (Index s = 0; s < opt.samples; ++s) {
    auto rng = make_rng(opt.seed, 0x9e, static_cast<std::uint64_t>(s));
    const Field f = prepare(sampler ? sampler(rng) : detail::default_sample(n, opt.real_samples, rng));
    const double r = ratio(f);
    if (r > best_raw) {
      best_raw = r;
      best = f;
      if (r > est.value) {
        est.value = r;
        est.best_sample = s;
      }
    }
    if (detail::is_checkpoint(s + 1) && best.size() == n) {
      auto crng = make_rng(opt.seed, 0x9f, static_cast<std::uint64_t>(s));
      Field cur = best;
      double cur_r = best_raw, step = 0.5;
      for (int it = 0; it < opt.climb_iterations && step > 1e-4; ++it) {
        const double scale = lp_norm(mu, cur, 2.0) / std::sqrt(std::max(mu.sum(), 1e-300));
        const Field dir = detail::default_sample(n, opt.real_samples, crng);
        const Field trial = prepare(cur + step * scale * dir);
        const double r = ratio(trial);
        if (r > cur_r) {
          cur = trial;
          cur_r = r;
        } else {
          step *= 0.9;
        }
      }
      if (cur_r > est.value) {
        est.value = cur_r;
        est.best_sample = s;
      }
    }
    ++est.samples;
  }
  return est;
}

inline NormEstimate estimate_map_norm(const FieldMap& map, const RVec& mu, double p, const NormEstimateOptions& opt,
                                      const FieldSampler& sampler = {}, const FieldMap& project = {}) {
  return estimate_map_norm(map, mu, mu, p, opt, sampler, project);
}

/// ||T||_{L^p(mu) -> L^p(mu)} for a dense linear map. Exact for p in {1, 2, inf};
/// otherwise a Boyd power iteration from random starts (a lower bound).
inline NormEstimate estimate_matrix_norm(const CMat& T, const RVec& mu, double p, const NormEstimateOptions& opt) {
  require(p >= 1.0, ErrorKind::parameter, "p must be at least 1");
  const Index n = mu.size();
  NormEstimate est;
  RVec wl(n), wr(n);
  for (Index i = 0; i < n; ++i) {
    wl(i) = std::isinf(p) ? 1.0 : std::pow(mu(i), 1.0 / p);
    wr(i) = 1.0 / wl(i);
  }
  const CMat B = wl.asDiagonal() * T * wr.asDiagonal();
  if (p == 2.0) {
    Eigen::JacobiSVD<CMat> svd(B);
    est.value = svd.singularValues()(0);
    est.exact = true;
    return est;
  }
  if (std::isinf(p)) {
    est.value = B.cwiseAbs().rowwise().sum().maxCoeff();
    est.exact = true;
    return est;
  }
  if (p == 1.0) {
    est.value = B.cwiseAbs().colwise().sum().maxCoeff();
    est.exact = true;
    return est;
  }
  const double q = detail::dual_exponent(p);
  const CMat BH = B.adjoint();
  auto boyd = [&](CVec x) {
    x /= detail::lvec_norm(x, p);
    double val = detail::lvec_norm(B * x, p);
    for (int it = 0; it < opt.power_iterations; ++it) {
      const CVec y = B * x;
      const CVec z = detail::dual_vector(y, p);
      const CVec w = BH * z;
      CVec xn = detail::dual_vector(w, q);
      const double nx = detail::lvec_norm(xn, p);
      if (!(nx > 0)) break;
      xn /= nx;
      const double v = detail::lvec_norm(B * xn, p);
      if (v <= val * (1 + 1e-13)) {
        val = std::max(val, v);
        break;
      }
      val = v;
      x = xn;
    }
    return val;
  };
  CVec best;
  double best_raw = -1.0;
  for (Index s = 0; s < opt.samples; ++s) {
    auto rng = make_rng(opt.seed, 0xb0, static_cast<std::uint64_t>(s));
    CVec x = s == 0 ? CVec(CVec::Ones(n)) : detail::default_sample(n, opt.real_samples, rng);
    const double r = detail::lvec_norm(B * x, p) / detail::lvec_norm(x, p);
    if (r > best_raw) {
      best_raw = r;
      best = x;
    }
    if (r > est.value) {
      est.value = r;
      est.best_sample = s;
    }
    if (detail::is_checkpoint(s + 1)) {
      const double v = boyd(best);
      if (v > est.value) {
        est.value = v;
        est.best_sample = s;
      }
    }
    ++est.samples;
  }
  return est;
}

}  // namespace paralab
