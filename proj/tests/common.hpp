#pragma once

#include "paralab/paralab.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace paralab::test {

inline std::vector<Edge> path_edges(Index n, double w = 1.0) {
  std::vector<Edge> e;
  for (Index i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, w});
  return e;
}

inline SpacePtr path_space(Index n) { return build_graph_space(path_edges(n), RVec::Ones(n)); }

inline GeneratorPtr path_laplacian(Index n) {
  auto s = path_space(n);
  return graph_laplacian(s, s->edges());
}

/// Connected random graph: a random spanning tree plus extra random edges.
inline std::vector<Edge> random_connected_edges(Index n, Index extra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  std::vector<Edge> e;
  for (Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Index> pick(0, i - 1);
    e.push_back({pick(rng), i, w(rng)});
  }
  std::uniform_int_distribution<Index> any(0, n - 1);
  for (Index k = 0; k < extra; ++k) {
    const Index a = any(rng), b = any(rng);
    if (a != b) e.push_back({a, b, w(rng)});
  }
  return e;
}

inline GeneratorPtr random_graph_laplacian(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> m(0.5, 2.0);
  RVec mu(n);
  for (Index i = 0; i < n; ++i) mu(i) = m(rng);
  const auto edges = random_connected_edges(n, n, seed);
  return graph_laplacian(build_graph_space(edges, mu), edges);
}

inline SpacePtr grid1d(Index n, double h = 1.0, bool periodic = false) { return build_grid_space({n}, h, periodic); }

inline GeneratorPtr grid_laplacian(const std::vector<Index>& dims, double h = 1.0) {
  auto s = build_grid_space(dims, h, false);
  return graph_laplacian(s);
}

inline Field cfield(std::initializer_list<double> v) {
  Field f(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) f(i++) = x;
  return f;
}

inline Field random_real_field(Index n, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x7e57);
  return random_real(n, rng).cast<Complex>();
}

inline Field random_complex_field(Index n, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x7e58);
  return random_complex(n, rng);
}

/// Removes the mu-mean so the field is orthogonal to constants.
inline Field mean_free(const Field& f, const RVec& mu) {
  const Complex m = (mu.cast<Complex>().array() * f.array()).sum() / mu.sum();
  return f.array() - m;
}

inline double rel(const Field& a, const Field& b) {
  const double s = std::max(b.norm(), 1e-300);
  return (a - b).norm() / s;
}

/// Composite Simpson rule in u = log s on [log a, log b] with 2m intervals.
template <class Fn>
double simpson_log(Fn&& fn, double a, double b, int m) {
  const double la = std::log(a), lb = std::log(b);
  const double hstep = (lb - la) / (2 * m);
  double s = fn(a) + fn(b);
  for (int k = 1; k < 2 * m; ++k) s += (k % 2 ? 4.0 : 2.0) * fn(std::exp(la + k * hstep));
  return s * hstep / 3.0;
}

/// Dense e^{-tL} from an independent real eigensolver on the symmetrized
/// operator M^{1/2} L M^{-1/2} (self-adjoint generators only).
inline CMat reference_semigroup(const Generator& gen, double t) {
  const RVec s = gen.space->mu().cwiseSqrt();
  const RMat sym = s.asDiagonal() * gen.matrix.real() * s.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (sym + sym.transpose()));
  const RVec e = (-t * es.eigenvalues().array()).exp();
  const RMat E = es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
  return (s.cwiseInverse().asDiagonal() * E * s.asDiagonal()).cast<Complex>();
}

}  // namespace paralab::test
