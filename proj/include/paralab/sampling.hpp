#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace paralab {

enum class SamplerKind { spectral_bandlimited, random_bump, eigenfunction_product };

inline const char* to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::spectral_bandlimited: return "spectral_bandlimited";
    case SamplerKind::random_bump: return "random_bump";
    case SamplerKind::eigenfunction_product: return "eigenfunction_product";
  }
  return "unknown";
}

inline SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "spectral_bandlimited") return SamplerKind::spectral_bandlimited;
  if (s == "random_bump") return SamplerKind::random_bump;
  if (s == "eigenfunction_product") return SamplerKind::eigenfunction_product;
  throw Error(ErrorKind::config, "unknown sampler kind '" + s + "'");
}

namespace detail {

inline std::vector<double> nonzero_spectrum(const SpectralCalculus& calc) {
  std::vector<double> out;
  for (Index i = 0; i < calc.eigenvalues().size(); ++i)
    if (!calc.kernel_mask()[static_cast<std::size_t>(i)]) out.push_back(std::abs(calc.eigenvalues()(i)));
  std::sort(out.begin(), out.end());
  return out;
}

inline Field random_field_for(const SpectralCalculus& calc, std::mt19937_64& rng) {
  const bool real = calc.generator().matrix.imag().cwiseAbs().maxCoeff() == 0.0;
  return real ? Field(random_real(calc.size(), rng).cast<Complex>()) : Field(random_complex(calc.size(), rng));
}

inline Field eigen_cluster(const SpectralCalculus& calc, Complex lambda, std::mt19937_64& rng) {
  const double tol = 1e-8 * std::max(calc.lambda_max(), 1e-300);
  return calc.apply([lambda, tol](Complex z) { return std::abs(z - lambda) <= tol ? Complex(1.0) : Complex(0.0); },
                    random_field_for(calc, rng), true);
}

inline Field draw_g0(const SpectralCalculus& calc, SamplerKind kind, std::mt19937_64& rng) {
  const Index n = calc.size();
  switch (kind) {
    case SamplerKind::spectral_bandlimited: {
      const auto spec = nonzero_spectrum(calc);
      require(!spec.empty(), ErrorKind::parameter, "generator has no nonzero spectrum");
      const double thr = spec[(spec.size() + 1) / 2 - 1] * (1 + 1e-9);
      return calc.apply([thr](Complex z) { return std::abs(z) <= thr ? Complex(1.0) : Complex(0.0); },
                        random_field_for(calc, rng), true);
    }
    case SamplerKind::random_bump: {
      const auto& space = calc.space();
      std::uniform_int_distribution<Index> pick(0, n - 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const Index x = pick(rng);
      const double r_lo = std::min(2 * space.scale_h(), space.diameter() / 2);
      const double r_hi = std::max(r_lo, space.diameter() / 4);
      const double r = r_lo + (r_hi - r_lo) * unit(rng);
      Field b = Field::Zero(n);
      for (Index y = 0; y < n; ++y)
        if (y == x || space.dist(x, y) < r) b(y) = 1.0;
      b /= lp_norm(space.mu(), b, 2.0);
      const double tau = 4.0 / std::max(calc.lambda_max(), 1e-300);
      Field g = calc.semigroup(tau, b);
      return g - calc.kernel_component(g);
    }
    case SamplerKind::eigenfunction_product: {
      const auto spec = nonzero_spectrum(calc);
      require(!spec.empty(), ErrorKind::parameter, "generator has no nonzero spectrum");
      std::vector<Complex> nz;
      for (Index i = 0; i < calc.eigenvalues().size(); ++i)
        if (!calc.kernel_mask()[static_cast<std::size_t>(i)]) nz.push_back(calc.eigenvalues()(i));
      std::uniform_int_distribution<std::size_t> pick(0, nz.size() - 1);
      const Complex la = nz[pick(rng)], lb = nz[pick(rng)];
      const Field u = eigen_cluster(calc, la, rng);
      const Field v = eigen_cluster(calc, lb, rng);
      Field g = u.cwiseProduct(v);
      return g - calc.kernel_component(g);
    }
  }
  return Field::Zero(n);
}

}  // namespace detail

/// A draw f = L g0 from the test class, normalized to ||f||_inf = 1. The
/// draw depends only on (seed, kind, index).
inline Field sample_test_function(const SpectralCalculus& calc, SamplerKind kind, std::uint64_t seed,
                                  std::uint64_t index = 0, int max_retries = 16) {
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    auto rng = make_rng(seed, 0x5a00 + static_cast<std::uint64_t>(kind) * 64 + static_cast<std::uint64_t>(attempt),
                        index);
    const Field g0 = detail::draw_g0(calc, kind, rng);
    Field f = calc.generator().apply(g0);
    const double m = sup_norm(f);
    if (m >= 1e-12) return f / m;
  }
  throw Error(ErrorKind::degenerate_sample, std::string("sampler ") + to_string(kind) +
                                                " produced only degenerate draws");
}

}  // namespace paralab
