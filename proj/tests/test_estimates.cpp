#include "common.hpp"

using namespace paralab;
using namespace paralab::test;

namespace {

double top_singular(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

/// sqrt of the top eigenvalue of t M^{-1/2} S^T M L S M^{-1/2}, dense eigensolve.
double gradient_oracle(const Generator& gen, double t) {
  const RVec mu = gen.space->mu();
  const RVec s = mu.cwiseSqrt(), si = s.cwiseInverse();
  const RMat S = reference_semigroup(gen, t).real();
  const RMat B = t * si.asDiagonal() * S.transpose() * mu.asDiagonal() * gen.matrix.real() * S * si.asDiagonal();
  const RMat Bs = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(Bs);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

QuadratureGrid power_grid(const SpectralCalculus& calc, double kappa, int npd = 40) {
  QuadratureSpec spec;
  spec.nodes_per_decade = npd;
  return adapted_grid_for_power(calc, kappa, spec, 1e-13);
}

}  // namespace

TEST(NormEstimation, ExactMatrixNorms) {
  CMat T(2, 2);
  T << 1.0, -2.0, 0.5, 3.0;
  RVec mu(2);
  mu << 1.0, 4.0;
  NormEstimateOptions opt;
  // L^1(mu): max_j sum_i mu_i |T_ij| / mu_j
  const double one = std::max((1.0 * 1 + 4.0 * 0.5) / 1.0, (1.0 * 2 + 4.0 * 3) / 4.0);
  EXPECT_NEAR(estimate_matrix_norm(T, mu, 1.0, opt).value, one, 1e-14);
  EXPECT_NEAR(estimate_matrix_norm(T, mu, kInfinity, opt).value, 3.5, 1e-14);
  const RVec s = mu.cwiseSqrt();
  EXPECT_NEAR(estimate_matrix_norm(T, mu, 2.0, opt).value,
              top_singular(s.asDiagonal() * T * s.cwiseInverse().asDiagonal()), 1e-13);
  EXPECT_TRUE(estimate_matrix_norm(T, mu, 2.0, opt).exact);
}

TEST(NormEstimation, DiagonalMapAtIntermediateExponent) {
  RVec d(6);
  d << 0.3, -1.7, 0.9, 1.2, -0.2, 0.5;
  const CMat T = d.cast<Complex>().asDiagonal();
  const RVec mu = RVec::LinSpaced(6, 0.5, 1.5);
  NormEstimateOptions opt;
  opt.samples = 64;
  const double v = estimate_map_norm([&](const Field& f) { return Field(T * f); }, mu, 3.0, opt).value;
  EXPECT_LE(v, 1.7 * (1 + 1e-12));
  EXPECT_GE(v, 1.7 * 0.99);
  EXPECT_NEAR(estimate_matrix_norm(T, mu, 3.0, opt).value, 1.7, 1e-6);
}

TEST(NormEstimation, MonotoneInSampleCount) {
  auto calc = build_calculus(grid_laplacian({20}));
  const CMat T = calc->matrix_function([](Complex z) { return std::exp(Complex(0, 2.0) * std::log(z)); }, true);
  FieldMap map = [&](const Field& f) { return Field(T * f); };
  double prev = 0;
  for (Index s : {1, 3, 8, 20, 64}) {
    NormEstimateOptions opt;
    opt.samples = s;
    opt.seed = 4;
    opt.climb_iterations = 30;
    const double v = estimate_map_norm(map, calc->mu(), 4.0, opt).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(UpperEstimate, TwoPoint) {
  auto calc = build_calculus(path_laplacian(2));
  const auto rep = fit_ue(*calc);
  EXPECT_EQ(rep.violations, 0);
  EXPECT_LT(rep.constants.at("C"), 10.0);
}

TEST(UpperEstimate, LineHasNoViolationsAtFittedConstant) {
  auto gen = grid_laplacian({128});
  auto calc = build_calculus(gen);
  const auto rep = fit_ue(*calc);
  const double C = rep.constants.at("C");
  EXPECT_EQ(rep.violations, 0);
  EXPECT_TRUE(std::isfinite(C));
  // dense kernel enumeration at a mid-window time
  const auto& s = *gen->space;
  const double t = std::sqrt(s.scale_h() * s.scale_h() * s.diameter() * s.diameter());
  UeOptions mid;
  mid.t_min = mid.t_max = t;
  mid.t_count = 1;
  EXPECT_LE(fit_ue(*calc, mid).constants.at("C"), C * (1 + 1e-9));
  const CMat K = reference_semigroup(*gen, t);
  for (Index x = 0; x < 128; x += 7)
    for (Index y = 0; y < 128; ++y) {
      const double pk = std::abs(K(x, y)) / s.mu(y);
      const double bound = C / s.volume(x, std::sqrt(t)) * std::exp(-s.dist(x, y) * s.dist(x, y) / (C * t));
      if (pk > 1e-250) {
        EXPECT_LE(pk, bound * (1 + 1e-6));
      }
    }
}

TEST(UpperEstimate, EnlargingTheWindowNeverLowersC) {
  auto calc = build_calculus(grid_laplacian({48}));
  UeOptions small, big;
  small.t_count = 4;
  big.t_count = 7;
  EXPECT_LE(fit_ue(*calc, small).constants.at("C"), fit_ue(*calc, big).constants.at("C") * (1 + 1e-9));
}

TEST(UpperEstimate, WindowBelowMeshScale) {
  auto calc = build_calculus(grid_laplacian({16}));
  UeOptions opt;
  opt.t_min = 0.1;
  EXPECT_THROW(fit_ue(*calc, opt), Error);
}

TEST(DaviesGaffney, LineDecay) {
  auto gen = grid_laplacian({256});
  auto calc = build_calculus(gen);
  const auto pairs = grid_ball_pairs(*gen->space, {2.0}, {8, 12, 16, 24, 32}, 32);
  const auto rep = davies_gaffney(*calc, pairs);
  EXPECT_LT(rep.constants.at("slope"), 0.0);
  EXPECT_GE(rep.constants.at("r_squared"), 0.9);
  EXPECT_LT(rep.constants.at("gamma_slope"), 0.0);
  EXPECT_GE(rep.constants.at("gamma_r_squared"), 0.9);
  // restricted block norms against an independent dense kernel
  const CMat K = reference_semigroup(*gen, 4.0);
  const RVec& mu = gen->space->mu();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto b1 = ball(*gen->space, pairs[k].x1, 2.0), b2 = ball(*gen->space, pairs[k].x2, 2.0);
    CMat blk(Index(b2.size()), Index(b1.size()));
    for (std::size_t i = 0; i < b2.size(); ++i)
      for (std::size_t j = 0; j < b1.size(); ++j)
        blk(Index(i), Index(j)) = std::sqrt(mu(b2[i])) * K(b2[i], b1[j]) / std::sqrt(mu(b1[j]));
    const double ref = top_singular(blk);
    if (ref > 1e-10) {
      EXPECT_NEAR(rep.rows[k][4], ref, 1e-8 * ref);
    }
  }
}

TEST(DaviesGaffney, CoincidentBallsAreContractive) {
  auto calc = build_calculus(grid_laplacian({64}));
  std::vector<BallPair> pairs{{10, 10, 2.0}, {30, 30, 3.0}, {10, 20, 2.0}, {10, 30, 2.0}};
  const auto rep = davies_gaffney(*calc, pairs);
  EXPECT_LE(rep.rows[0][4], 1.0 + 1e-12);
  EXPECT_LE(rep.rows[1][4], 1.0 + 1e-12);
  EXPECT_EQ(rep.rows[0][3], 0.0);
}

TEST(DaviesGaffney, WholeSpaceKernelFree) {
  auto gen = grid_laplacian({40});
  auto calc = build_calculus(gen);
  Eigen::SelfAdjointEigenSolver<RMat> es(gen->matrix.real());
  const double lmin = es.eigenvalues()(1);
  for (double r : {0.5, 2.0, 5.0}) EXPECT_NEAR(semigroup_norm_kernel_free(*calc, r), std::exp(-r * r * lmin), 1e-12);
}

TEST(DaviesGaffney, TooFewPairs) {
  auto calc = build_calculus(grid_laplacian({64}));
  try {
    davies_gaffney(*calc, {{10, 20, 2.0}, {10, 30, 2.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(GradientBound, BelowIndependentOracle) {
  auto gen = grid_laplacian({48});
  auto calc = build_calculus(gen);
  const std::vector<double> ts{1.0 / calc->lambda_max(), 1.0, 10.0};
  GradientOptions opt;
  opt.samples = 200;
  const auto rep = gradient_bound(*calc, 2.0, ts, opt);
  EXPECT_EQ(rep.violations, 0);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double oracle = gradient_oracle(*gen, ts[k]);
    EXPECT_NEAR(rep.rows[k][2], oracle, 1e-6 * oracle);
    EXPECT_LE(rep.rows[k][1], oracle * (1 + 1e-6));
    EXPECT_GE(rep.rows[k][1], 0.5 * oracle);
    EXPECT_GT(rep.rows[k][1], 0.0);
  }
}

TEST(GradientBound, ConstantsAreAnnihilated) {
  auto gen = grid_laplacian({16});
  auto calc = build_calculus(gen);
  EXPECT_LE(gamma_len(*gen, calc->semigroup(0.5, Field::Ones(16))).maxCoeff(), 1e-7);
}

TEST(GradientBound, OtherExponentIsFinite) {
  auto calc = build_calculus(grid_laplacian({24}));
  GradientOptions opt;
  opt.samples = 50;
  const auto rep = gradient_bound(*calc, 4.0, {1.0}, opt);
  EXPECT_TRUE(std::isfinite(rep.constants.at("sup_estimate")));
  EXPECT_GT(rep.constants.at("sup_estimate"), 0.0);
}

TEST(SquareFunction, ScalarMatchesQuadrature) {
  for (double a : {0.25, 0.5, 0.9})
    for (int N : {1, 2, 4}) {
      auto fn = [a, N](double s) { return std::pow(s, 2 * a) * phi_N(N, s) * phi_N(N, s); };
      // near 0 the integrand is s^{2a}; its integral over (0, s0) is added in closed form
      const double s0 = 1e-14;
      const double ref = simpson_log(fn, s0, 400.0, 8000) + std::pow(s0, 2 * a) / (2 * a);
      EXPECT_NEAR(vertical_square_scalar(a, N), ref, 1e-8 * ref);
    }
}

TEST(SquareFunction, EigenvectorGivesUniversalScalar) {
  auto gen = path_laplacian(3);
  auto calc = build_calculus(gen);
  const double a = 0.5;
  const int N = 2;
  const auto grid = power_grid(*calc, 2 * a);
  auto fn = [a, N](double s) { return std::pow(s, 2 * a) * phi_N(N, s) * phi_N(N, s); };
  const double I = simpson_log(fn, 1e-16, 400.0, 8000);
  for (const Field& v : {cfield({1, 0, -1}), cfield({1, -2, 1})})
    for (double p : {2.0, 4.0}) EXPECT_NEAR(vertical_square_function(*calc, v, a, N, p, grid), std::sqrt(I), 1e-8);
}

TEST(SquareFunction, RandomFieldBoundedByEigenvalueValues) {
  auto calc = build_calculus(path_laplacian(3));
  const auto grid = power_grid(*calc, 1.0);
  const double bound = std::sqrt(vertical_square_scalar(0.5, 2));
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Field f = random_complex_field(3, k);
    EXPECT_LE(vertical_square_function(*calc, f, 0.5, 2, 2.0, grid), bound * (1 + 1e-8));
  }
}

TEST(SquareFunction, GammaVersionOnEigenvector) {
  auto gen = path_laplacian(3);
  auto calc = build_calculus(gen);
  const double a = 0.5;
  const auto grid = power_grid(*calc, 1 - a);
  auto fn = [a](double s) { return std::pow(s, 1 - a) * phi_N(2, s) * phi_N(2, s); };
  const double J = simpson_log(fn, 1e-20, 400.0, 10000);
  const Field v = cfield({1, 0, -1});
  EXPECT_NEAR(gamma_square_function(*calc, v, a, 2, 2.0, grid), std::sqrt(J), 1e-6);
}

TEST(SquareFunction, ZeroFieldIsDegenerate) {
  auto calc = build_calculus(path_laplacian(3));
  const auto grid = adapted_grid(*calc);
  try {
    vertical_square_function(*calc, Field::Zero(3), 0.5, 2, 2.0, grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_sample);
  }
}

TEST(TentSpace, ConstantInSpace) {
  auto s = grid1d(20);
  const QuadratureGrid grid(0.5, 50.0, 10);
  TimeField F{grid, CMat(grid.size(), 20)};
  double vertical = 0;
  for (Index k = 0; k < grid.size(); ++k) {
    const double c = std::exp(-grid.node(k) / 10.0);
    F.values.row(k).setConstant(c);
    vertical += grid.weight(k) * c * c;
  }
  for (double p : {2.0, 4.0}) {
    const double expect = std::sqrt(vertical) * std::pow(s->total_measure(), 1.0 / p);
    EXPECT_NEAR(tent_norm(*s, F, p, 1.0), expect, 1e-12 * expect);
    EXPECT_NEAR(tent_norm(*s, F, p, 4.0), expect, 1e-12 * expect);
    for (int j : {1, 2})
      EXPECT_NEAR(change_of_angle_ratio(*s, F, p, j, 1.0), std::pow(2.0, -j / 2.0), 1e-12);
  }
}

TEST(TentSpace, AngleZeroIsExactlyOne) {
  auto gen = grid_laplacian({32});
  auto calc = build_calculus(gen);
  const Field f = sample_test_function(*calc, SamplerKind::random_bump, 3, 0);
  const auto F = sqrt_t_gamma_pt(*calc, f, 3, adapted_grid(*calc, {1e-2, 1e2, 10}));
  EXPECT_EQ(change_of_angle_ratio(*gen->space, F, 4.0, 0, 1.0), 1.0);
  EXPECT_THROW(tent_norm(*gen->space, F, 2.0, 0.5), Error);
}

TEST(TentSpace, RatiosStableUnderRefinement) {
  auto gen = grid_laplacian({128});
  auto calc = build_calculus(gen);
  const double nu = doubling_profile(*gen->space).nu_fit;
  const Field f = sample_test_function(*calc, SamplerKind::spectral_bandlimited, 6, 0);
  const auto coarse = sqrt_t_gamma_pt(*calc, f, 3, adapted_grid(*calc, {1e-2, 1e2, 10}));
  const auto fine = sqrt_t_gamma_pt(*calc, f, 3, adapted_grid(*calc, {1e-2, 1e2, 100}));
  for (int j : {1, 2, 3}) {
    const double a = change_of_angle_ratio(*gen->space, coarse, 4.0, j, nu);
    const double b = change_of_angle_ratio(*gen->space, fine, 4.0, j, nu);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a, b, 0.1 * b);
  }
}

TEST(ImaginaryPowers, UnitaryOnHilbertSpace) {
  auto calc = build_calculus(grid_laplacian({32}));
  const auto rep = imaginary_power_growth(*calc, 2.0, {-8, -2, 0, 2, 8});
  for (const auto& row : rep.rows) EXPECT_NEAR(row[1], 1.0, 1e-8);
}

TEST(ImaginaryPowers, IdentityAtZeroForOtherExponent) {
  auto calc = build_calculus(grid_laplacian({32}));
  ImaginaryPowerOptions opt;
  opt.samples = 20;
  const auto rep = imaginary_power_growth(*calc, 4.0, {-1, 0, 1}, opt);
  EXPECT_NEAR(rep.rows[1][1], 1.0, 1e-10);
  EXPECT_GE(rep.rows[0][1], 1.0 - 1e-10);
  EXPECT_TRUE(std::isfinite(rep.constants.at("s")));
}

TEST(ImaginaryPowers, GridMustBeSymmetric) {
  auto calc = build_calculus(grid_laplacian({8}));
  EXPECT_THROW(imaginary_power_growth(*calc, 2.0, {0, 1, 2}), Error);
}
