#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace paralab {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

/// A complex-valued function on the points of a finite space.
using Field = CVec;

/// Sentinel for the L^infinity norm.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  parameter,
  size,
  connectivity,
  ellipticity,
  accretivity,
  unsupported_operator,
  conditioning,
  kernel_leak,
  degenerate_sample,
  insufficient_data,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::size: return "size";
    case ErrorKind::connectivity: return "connectivity";
    case ErrorKind::ellipticity: return "ellipticity";
    case ErrorKind::accretivity: return "accretivity";
    case ErrorKind::unsupported_operator: return "unsupported-operator";
    case ErrorKind::conditioning: return "conditioning";
    case ErrorKind::kernel_leak: return "kernel-leak";
    case ErrorKind::degenerate_sample: return "degenerate-sample";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

/// Deterministic per-stream generator: the k-th draw of stream s under seed
/// depends only on (seed, s, k), so extending a sample count never changes
/// earlier samples.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline RVec random_real(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RVec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline CVec random_complex(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVec v(n);
  for (Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = Complex(re, im);
  }
  return v;
}

inline double sup_norm(const CVec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Induced infinity norm (max absolute row sum).
inline double matrix_inf_norm(const CMat& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Least-squares line y = slope*x + intercept with coefficient of determination.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::insufficient_data,
          "line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0, ErrorKind::insufficient_data, "line fit needs two distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    sse += r * r;
  }
  // a constant response is fit perfectly
  fit.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace paralab
