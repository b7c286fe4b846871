#pragma once

#include "paralab/core.hpp"

#include <cmath>
#include <complex>

namespace paralab {

/// c_N = int_0^inf s^N e^{-s} ds/s = (N-1)!
inline double c_N(int N) {
  require(N >= 1, ErrorKind::parameter, "approximation order must be >= 1");
  return std::tgamma(static_cast<double>(N));
}

namespace detail {

template <class T>
T exp_log_term(int k, const T& z, double log_fact) {
  // z^k e^{-z} / k!, evaluated in log form so that large z never overflows
  using std::exp;
  using std::log;
  return exp(static_cast<double>(k) * log(z) - z - log_fact);
}

inline bool is_zero(double z) { return z == 0.0; }
inline bool is_zero(const Complex& z) { return z == Complex(0.0); }

inline double magnitude(double z) { return std::abs(z); }
inline double magnitude(const Complex& z) { return std::abs(z); }

}  // namespace detail

/// phi_N(z) = c_N^{-1} int_z^inf s^N e^{-s} ds/s = e^{-z} sum_{k<N} z^k/k!.
template <class T>
T phi_N(int N, const T& z) {
  require(N >= 1, ErrorKind::parameter, "approximation order must be >= 1");
  if (detail::is_zero(z)) return T(1.0);
  if (detail::magnitude(z) <= 1.0) {
    T term(1.0), sum(0.0);
    for (int k = 0; k < N; ++k) {
      sum += term;
      term *= z / static_cast<double>(k + 1);
    }
    using std::exp;
    return exp(-z) * sum;
  }
  T sum(0.0);
  for (int k = 0; k < N; ++k) sum += detail::exp_log_term(k, z, std::lgamma(k + 1.0));
  return sum;
}

/// psi_N(z) = c_N^{-1} z^N e^{-z}; the multiplier of Q_t^{(N)} at tL = z.
template <class T>
T psi_N(int N, const T& z) {
  require(N >= 1, ErrorKind::parameter, "approximation order must be >= 1");
  if (detail::is_zero(z)) return T(0.0);
  return detail::exp_log_term(N, z, std::lgamma(static_cast<double>(N)));
}

/// psi_N(z) / z = c_N^{-1} z^{N-1} e^{-z}; the multiplier of (tL)^{-1} Q_t^{(N)}.
template <class T>
T tilde_psi_N(int N, const T& z) {
  require(N >= 1, ErrorKind::parameter, "approximation order must be >= 1");
  if (detail::is_zero(z)) return N == 1 ? T(1.0) : T(0.0);
  return detail::exp_log_term(N - 1, z, std::lgamma(static_cast<double>(N)));
}

}  // namespace paralab
