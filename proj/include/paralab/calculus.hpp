#pragma once

#include "paralab/core.hpp"
#include "paralab/operators.hpp"
#include "paralab/spectral_functions.hpp"

#include <Eigen/Sparse>
#include <cmath>
#include <memory>
#include <vector>

namespace paralab {

struct CalculusOptions {
  double condition_threshold = 1e8;
  bool allow_triangular_fallback = true;
  /// kernel-leak errors from fractional and imaginary powers
  bool strict = false;
  /// eigenvalues with |lambda| <= kernel_tol * max|lambda| span N(L)
  double kernel_tol = 1e-9;
  Index max_self_adjoint = 4096;
  Index max_non_normal = 512;
};

enum class FactorizationPath { self_adjoint, eigen, triangular };

inline const char* to_string(FactorizationPath p) {
  switch (p) {
    case FactorizationPath::self_adjoint: return "self_adjoint";
    case FactorizationPath::eigen: return "eigen";
    case FactorizationPath::triangular: return "triangular";
  }
  return "unknown";
}

/// Field with the norm of the kernel component that was annihilated.
struct DeflatedField {
  Field value;
  double kernel_norm = 0.0;
};

/// Precomputed factorization of L; every function of L is applied through it.
class SpectralCalculus {
 public:
  SpectralCalculus(GeneratorPtr gen, CalculusOptions opt = {}) : gen_(std::move(gen)), opt_(opt) {
    const Index n = gen_->size();
    const RVec& mu = gen_->space->mu();
    sqrt_mu_ = mu.cwiseSqrt();
    inv_sqrt_mu_ = sqrt_mu_.cwiseInverse();
    if (gen_->self_adjoint) {
      require(n <= opt_.max_self_adjoint, ErrorKind::size, "self-adjoint calculus limited to " +
                                                               std::to_string(opt_.max_self_adjoint) + " points");
      build_self_adjoint();
    } else {
      require(n <= opt_.max_non_normal, ErrorKind::size, "non-normal calculus limited to " +
                                                            std::to_string(opt_.max_non_normal) + " points");
      build_non_normal();
    }
    finish();
  }

  const Generator& generator() const { return *gen_; }
  const GeneratorPtr& generator_ptr() const { return gen_; }
  const MetricMeasureSpace& space() const { return *gen_->space; }
  const RVec& mu() const { return gen_->space->mu(); }
  Index size() const { return gen_->size(); }
  const CalculusOptions& options() const { return opt_; }
  FactorizationPath path() const { return path_; }
  const CVec& eigenvalues() const { return lambda_; }
  const std::vector<bool>& kernel_mask() const { return kernel_; }
  Index kernel_dimension() const {
    Index k = 0;
    for (bool b : kernel_) k += b;
    return k;
  }
  double eigvec_condition() const { return condition_; }
  double lambda_min_nonzero() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  double reconstruction_error() const { return reconstruction_error_; }
  bool real_basis() const { return real_basis_; }

  /// f(L) v for a scalar multiplier `fn` of the eigenvalue. With `deflate`
  /// the kernel of L is sent to zero regardless of fn(0).
  template <class Fn>
  Field apply(Fn&& fn, const Field& v, bool deflate = false) const {
    require(v.size() == size(), ErrorKind::parameter, "field length mismatch");
    if (path_ == FactorizationPath::triangular) return triangular_function(fn, deflate) * v;
    CVec c = coefficients(v);
    for (Index i = 0; i < c.size(); ++i)
      c(i) *= (deflate && kernel_[static_cast<std::size_t>(i)]) ? Complex(0.0) : Complex(fn(lambda_(i)));
    return synthesize(c);
  }

  /// Dense matrix of f(L).
  template <class Fn>
  CMat matrix_function(Fn&& fn, bool deflate = false) const {
    if (path_ == FactorizationPath::triangular) return triangular_function(fn, deflate);
    CVec d(size());
    for (Index i = 0; i < size(); ++i)
      d(i) = (deflate && kernel_[static_cast<std::size_t>(i)]) ? Complex(0.0) : Complex(fn(lambda_(i)));
    if (path_ == FactorizationPath::self_adjoint) {
      const CMat u = basis();
      return inv_sqrt_mu_.asDiagonal() * (u * d.asDiagonal() * u.adjoint()) * sqrt_mu_.asDiagonal();
    }
    return vecs_ * d.asDiagonal() * vecs_inv_;
  }

  /// Spectral projection onto N(L).
  Field kernel_component(const Field& v) const {
    return apply([](Complex) { return Complex(1.0); }, v, false) -
           apply([](Complex) { return Complex(1.0); }, v, true);
  }

  CMat kernel_projector() const {
    return matrix_function([](Complex) { return Complex(1.0); }, false) -
           matrix_function([](Complex) { return Complex(1.0); }, true);
  }

  Field semigroup(double t, const Field& f) const {
    require(t > 0, ErrorKind::parameter, "semigroup time must be positive");
    return apply([t](Complex z) { return std::exp(-t * z); }, f);
  }

  /// p_t(x,y) = [e^{-tL}]_{xy} / mu(y).
  CMat heat_kernel(double t) const {
    require(t > 0, ErrorKind::parameter, "semigroup time must be positive");
    CMat k = matrix_function([t](Complex z) { return std::exp(-t * z); });
    return k * mu().cwiseInverse().asDiagonal();
  }

  Field q_t(int N, double t, const Field& f) const {
    require(t > 0, ErrorKind::parameter, "time must be positive");
    return apply([N, t](Complex z) { return psi_N(N, Complex(t) * z); }, f);
  }

  Field p_t(int N, double t, const Field& f) const {
    require(t > 0, ErrorKind::parameter, "time must be positive");
    return apply([N, t](Complex z) { return phi_N(N, Complex(t) * z); }, f);
  }

  /// c_D^{-1} (tL)^{D-1} e^{-tL} = (tL)^{-1} Q_t^{(D)} without inversion.
  Field q_tilde(int D, double t, const Field& f) const {
    require(t > 0, ErrorKind::parameter, "time must be positive");
    return apply([D, t](Complex z) { return tilde_psi_N(D, Complex(t) * z); }, f);
  }

  /// L^beta on the complement of N(L) (principal branch).
  DeflatedField frac_power(double beta, const Field& f) const {
    return deflated([beta](Complex z) { return std::pow(z, beta); }, f);
  }

  /// L^{i eta} on the complement of N(L).
  DeflatedField imaginary_power(double eta, const Field& f) const {
    return deflated([eta](Complex z) { return std::exp(Complex(0.0, eta) * std::log(z)); }, f);
  }

  double l2_norm(const Field& f) const { return lp_norm(mu(), f, 2.0); }

 private:
  template <class Fn>
  DeflatedField deflated(Fn&& fn, const Field& f) const {
    DeflatedField out;
    const Field k = kernel_component(f);
    out.kernel_norm = l2_norm(k);
    const double nf = l2_norm(f);
    if (opt_.strict)
      require(out.kernel_norm <= 0.01 * nf, ErrorKind::kernel_leak,
              "field has a kernel component of relative size " + std::to_string(out.kernel_norm / nf));
    out.value = apply(fn, f, true);
    return out;
  }

  CMat basis() const { return real_basis_ ? CMat(basis_real_.cast<Complex>()) : basis_complex_; }

  CVec coefficients(const Field& v) const {
    if (path_ == FactorizationPath::self_adjoint) {
      const CVec w = sqrt_mu_.asDiagonal() * v;
      if (real_basis_) {
        const RVec re = basis_real_.transpose() * w.real();
        const RVec im = basis_real_.transpose() * w.imag();
        CVec c(re.size());
        for (Index i = 0; i < c.size(); ++i) c(i) = Complex(re(i), im(i));
        return c;
      }
      return basis_complex_.adjoint() * w;
    }
    return vecs_inv_ * v;
  }

  Field synthesize(const CVec& c) const {
    if (path_ == FactorizationPath::self_adjoint) {
      CVec w;
      if (real_basis_) {
        const RVec re = basis_real_ * c.real();
        const RVec im = basis_real_ * c.imag();
        w.resize(re.size());
        for (Index i = 0; i < w.size(); ++i) w(i) = Complex(re(i), im(i));
      } else {
        w = basis_complex_ * c;
      }
      return inv_sqrt_mu_.asDiagonal() * w;
    }
    return vecs_ * c;
  }

  void build_self_adjoint() {
    path_ = FactorizationPath::self_adjoint;
    const CMat& L = gen_->matrix;
    CMat s = sqrt_mu_.asDiagonal() * L * inv_sqrt_mu_.asDiagonal();
    s = (0.5 * (s + s.adjoint())).eval();
    real_basis_ = s.imag().cwiseAbs().maxCoeff() == 0.0;
    if (real_basis_) {
      Eigen::SelfAdjointEigenSolver<RMat> es(s.real());
      require(es.info() == Eigen::Success, ErrorKind::conditioning, "symmetric eigensolver failed");
      lambda_ = es.eigenvalues().cast<Complex>();
      basis_real_ = es.eigenvectors();
    } else {
      Eigen::SelfAdjointEigenSolver<CMat> es(s);
      require(es.info() == Eigen::Success, ErrorKind::conditioning, "Hermitian eigensolver failed");
      lambda_ = es.eigenvalues().cast<Complex>();
      basis_complex_ = es.eigenvectors();
    }
    condition_ = 1.0;
  }

  void build_non_normal() {
    const CMat& L = gen_->matrix;
    Eigen::ComplexEigenSolver<CMat> es(L);
    bool ok = es.info() == Eigen::Success;
    if (ok) {
      vecs_ = es.eigenvectors();
      lambda_ = es.eigenvalues();
      Eigen::JacobiSVD<CMat> svd(vecs_);
      const auto& sv = svd.singularValues();
      condition_ = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : kInfinity;
      ok = condition_ <= opt_.condition_threshold;
    }
    if (ok) {
      path_ = FactorizationPath::eigen;
      vecs_inv_ = vecs_.partialPivLu().inverse();
      return;
    }
    require(opt_.allow_triangular_fallback, ErrorKind::conditioning,
            "eigenvector condition " + std::to_string(condition_) + " exceeds threshold");
    path_ = FactorizationPath::triangular;
    Eigen::ComplexSchur<CMat> schur(L);
    require(schur.info() == Eigen::Success, ErrorKind::conditioning, "Schur decomposition failed");
    schur_t_ = schur.matrixT();
    schur_z_ = schur.matrixU();
    lambda_ = schur_t_.diagonal();
  }

  void finish() {
    const Index n = size();
    lambda_max_ = 0.0;
    for (Index i = 0; i < n; ++i) lambda_max_ = std::max(lambda_max_, std::abs(lambda_(i)));
    kernel_.assign(static_cast<std::size_t>(n), false);
    lambda_min_ = kInfinity;
    for (Index i = 0; i < n; ++i) {
      const bool k = std::abs(lambda_(i)) <= opt_.kernel_tol * std::max(lambda_max_, 1e-300);
      kernel_[static_cast<std::size_t>(i)] = k;
      if (!k) lambda_min_ = std::min(lambda_min_, std::abs(lambda_(i)));
      if (k) lambda_(i) = 0.0;
    }
    const CMat rebuilt = matrix_function([](Complex z) { return z; });
    reconstruction_error_ = matrix_inf_norm(rebuilt - gen_->matrix) / std::max(gen_->norm(), 1e-300);
  }

  /// Schur-Parlett evaluation of f(L) = Z f(T) Z^*.
  template <class Fn>
  CMat triangular_function(Fn&& fn, bool deflate) const {
    const Index n = size();
    CMat F = CMat::Zero(n, n);
    const CMat& T = schur_t_;
    for (Index i = 0; i < n; ++i)
      F(i, i) = (deflate && kernel_[static_cast<std::size_t>(i)]) ? Complex(0.0) : Complex(fn(T(i, i)));
    const double sep_floor = 1e-10 * std::max(lambda_max_, 1e-300);
    for (Index p = 1; p < n; ++p)
      for (Index i = 0; i + p < n; ++i) {
        const Index j = i + p;
        const Complex denom = T(j, j) - T(i, i);
        require(std::abs(denom) > sep_floor, ErrorKind::conditioning,
                "triangular fallback needs separated eigenvalues");
        Complex s = T(i, j) * (F(j, j) - F(i, i));
        for (Index k = i + 1; k < j; ++k) s += F(i, k) * T(k, j) - T(i, k) * F(k, j);
        F(i, j) = s / denom;
      }
    return schur_z_ * F * schur_z_.adjoint();
  }

  GeneratorPtr gen_;
  CalculusOptions opt_;
  FactorizationPath path_ = FactorizationPath::self_adjoint;
  RVec sqrt_mu_, inv_sqrt_mu_;
  CVec lambda_;
  bool real_basis_ = false;
  RMat basis_real_;
  CMat basis_complex_;
  CMat vecs_, vecs_inv_;
  CMat schur_t_, schur_z_;
  std::vector<bool> kernel_;
  double condition_ = 1.0;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  double reconstruction_error_ = 0.0;
};

using CalculusPtr = std::shared_ptr<const SpectralCalculus>;

inline CalculusPtr build_calculus(GeneratorPtr gen, CalculusOptions opt = {}) {
  return std::make_shared<const SpectralCalculus>(std::move(gen), opt);
}

/// e^{-tL} for generators with nonpositive real off-diagonal entries, via
/// uniformization e^{-tL} = e^{-tc} e^{t(cI - L)} and a series of nonnegative
/// matrices. Tiny entries keep full relative accuracy (no cancellation).
inline RMat positive_semigroup_matrix(const Generator& gen, double t) {
  require(t > 0, ErrorKind::parameter, "semigroup time must be positive");
  const Index n = gen.size();
  require(gen.matrix.imag().cwiseAbs().maxCoeff() == 0.0, ErrorKind::unsupported_operator,
          "positive series needs a real generator");
  const RMat L = gen.matrix.real();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      require(i == j || L(i, j) <= 0.0, ErrorKind::unsupported_operator,
              "positive series needs nonpositive off-diagonal entries");
  const double c = L.diagonal().maxCoeff();
  const RMat Bd = c * RMat::Identity(n, n) - L;
  const double bnorm = Bd.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::SparseMatrix<double> B = Bd.sparseView();
  int squarings = 0;
  double tau = t;
  while (tau * bnorm > 0.5) {
    tau *= 0.5;
    ++squarings;
  }
  RMat sum = RMat::Identity(n, n);
  RMat term = RMat::Identity(n, n);
  for (Index k = 1; k <= 4 * n + 60; ++k) {
    term = (term * B) * (tau / static_cast<double>(k));
    sum += term;
    double worst = 0.0;
    bool any = false;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (term(i, j) > 0) {
          any = true;
          worst = std::max(worst, term(i, j) / sum(i, j));
        }
    if (!any || worst < 1e-18) break;
  }
  // scale before squaring so large t cannot overflow
  sum *= std::exp(-tau * c);
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  return sum;
}

}  // namespace paralab
