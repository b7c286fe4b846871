#include "common.hpp"

using namespace paralab;
using namespace paralab::test;

namespace {

struct Bench {
  CalculusPtr calc;
  QuadratureGrid grid;
};

Bench setup(GeneratorPtr gen, int npd = 40) {
  auto calc = build_calculus(gen);
  QuadratureSpec spec;
  spec.nodes_per_decade = npd;
  return {calc, adapted_grid(*calc, spec)};
}

GeneratorPtr smooth_divergence_1d(Index n) {
  const double h = 1.0 / static_cast<double>(n - 1);
  auto s = build_grid_space({n}, h, false);
  std::vector<CMat> A;
  for (Index i = 0; i < n; ++i) {
    CMat a(1, 1);
    a(0, 0) = 1.0 + 0.3 * std::sin(2 * M_PI * (i + 0.5) * h);
    A.push_back(a);
  }
  return divergence_form(s, A);
}

}  // namespace

TEST(Paraproduct, VanishesWithZeroFactor) {
  auto s = setup(path_laplacian(5));
  const Field f = random_complex_field(5, 1), zero = Field::Zero(5);
  EXPECT_EQ(sup_norm(paraproduct_pi_g(*s.calc, f, zero, 3, s.grid)), 0.0);
  EXPECT_EQ(sup_norm(resonant_pi(*s.calc, zero, f, 3, s.grid)), 0.0);
}

TEST(Paraproduct, TwoPointClosedForms) {
  auto s = setup(path_laplacian(2));
  const Field f = cfield({1, -1});
  const Field half = Field::Constant(2, 0.5);
  const auto t = product_terms(*s.calc, f, f, 3, s.grid);
  EXPECT_LE(sup_norm(t.resonant), 1e-10);
  EXPECT_LE(sup_norm(t.pi_g_f - half), 1e-6);
  EXPECT_LE(sup_norm(t.pi_f_g - half), 1e-6);
  EXPECT_LE(sup_norm(pi_gamma(*s.calc, f, f, 3, s.grid)), 1e-10);
  const auto rep = decomposition_residual(*s.calc, f, f, 3, s.grid, 2.0);
  EXPECT_LE(rep.residual_p, 1e-6);
  EXPECT_TRUE(rep.warnings.empty());
}

TEST(Paraproduct, ConstantSymbolIsOneHalf) {
  // g = 1: the multiplier of f -> Pi_g(f) is int phi_D psi_D ds/s, independent of lambda
  for (int D : {2, 5}) {
    const double c = simpson_log([D](double x) { return phi_N(D, x) * psi_N(D, x); }, 1e-14, 300.0, 8000);
    EXPECT_NEAR(c, 0.5, 1e-9);
    // psi_2 ~ x^2 near 0, so the window reaches two decades further down
    auto calc = build_calculus(random_graph_laplacian(20, 3));
    QuadratureSpec spec;
    spec.t_min_factor = 1e-4;
    const Bench s{calc, adapted_grid(*calc, spec)};
    const Field f = mean_free(random_complex_field(20, 2), s.calc->mu());
    const Field one = Field::Ones(20);
    EXPECT_LE(rel(paraproduct_pi_g(*s.calc, f, one, D, s.grid), c * f), 1e-6);
    EXPECT_LE(rel(resonant_pi(*s.calc, f, one, D, s.grid), c * f), 1e-6);
  }
}

TEST(Paraproduct, TermsAreBilinear) {
  auto s = setup(random_graph_laplacian(15, 4), 10);
  const Field f1 = random_complex_field(15, 1), f2 = random_complex_field(15, 2), g = random_complex_field(15, 3);
  const Complex a(0.7, -0.4);
  const auto lhs = product_terms(*s.calc, f1 + a * f2, g, 4, s.grid);
  const auto t1 = product_terms(*s.calc, f1, g, 4, s.grid);
  const auto t2 = product_terms(*s.calc, f2, g, 4, s.grid);
  EXPECT_LE(rel(lhs.resonant, t1.resonant + a * t2.resonant), 1e-10);
  EXPECT_LE(rel(lhs.pi_g_f, t1.pi_g_f + a * t2.pi_g_f), 1e-10);
  EXPECT_LE(rel(lhs.pi_f_g, t1.pi_f_g + a * t2.pi_f_g), 1e-10);
  const auto sw = product_terms(*s.calc, g, f1, 4, s.grid);
  EXPECT_LE(rel(sw.pi_g_f, t1.pi_f_g), 1e-12);
  EXPECT_LE(rel(sw.resonant, t1.resonant), 1e-12);
}

TEST(Decomposition, PathOfThreeEigenvector) {
  auto gen = path_laplacian(3);
  auto s = setup(gen);
  const Field v = cfield({1, 0, -1});
  ASSERT_LE(sup_norm(gen->apply(v) - v), 1e-14);
  const auto rep = decomposition_residual(*s.calc, v, v, 5, s.grid, 2.0);
  EXPECT_LE(rep.residual_p, 1e-6);
  // oracle: the same integrals on a wider window at ten times the resolution
  const QuadratureGrid dense(s.grid.t_min() * 1e-2, s.grid.t_max() * 1e2, 400);
  const auto ref = product_terms(*s.calc, v, v, 5, dense);
  EXPECT_LE(sup_norm(rep.pi_resonant - ref.resonant), 1e-6);
  EXPECT_LE(sup_norm(rep.pi_g_f - ref.pi_g_f), 1e-6);
  EXPECT_LE(sup_norm(v.cwiseProduct(v) - ref.resonant - ref.pi_g_f - ref.pi_f_g), 1e-9);
}

TEST(Decomposition, SampledFieldsOnGrid) {
  auto s = setup(grid_laplacian({32}));
  for (std::uint64_t k = 0; k < 3; ++k) {
    const Field f = sample_test_function(*s.calc, SamplerKind::spectral_bandlimited, 5, 2 * k);
    const Field g = sample_test_function(*s.calc, SamplerKind::random_bump, 5, 2 * k + 1);
    const auto rep = decomposition_residual(*s.calc, f, g, 5, s.grid, 2.0);
    EXPECT_LE(rep.residual_p, 1e-6);
    EXPECT_LE(rep.residual_refined, 1e-6);
    EXPECT_LE(rep.carre_split_residual, 2e-6);
  }
}

TEST(Decomposition, DegenerateProduct) {
  auto s = setup(path_laplacian(3));
  try {
    decomposition_residual(*s.calc, cfield({1, 0, 0}), cfield({0, 0, 1}), 3, s.grid, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_sample);
  }
}

TEST(Decomposition, NarrowGridWarns) {
  auto calc = build_calculus(path_laplacian(4));
  const QuadratureGrid narrow(1.0, 2.0, 10);
  std::vector<std::string> warnings;
  const Field f = random_real_field(4, 1);
  const Field out = paraproduct_pi_g(*calc, f, f, 3, narrow, &warnings);
  EXPECT_FALSE(warnings.empty());
  EXPECT_TRUE(out.allFinite());
}

TEST(PiGamma, ConstantsAndSymmetry) {
  auto s = setup(random_graph_laplacian(15, 8), 20);
  const Field f = random_complex_field(15, 1), g = random_complex_field(15, 2), one = Field::Ones(15);
  EXPECT_LE(sup_norm(pi_gamma(*s.calc, f, one, 4, s.grid)), 1e-13);
  EXPECT_LE(sup_norm(pi_gamma(*s.calc, one, g, 4, s.grid)), 1e-13);
  EXPECT_LE(rel(pi_gamma(*s.calc, f, g, 4, s.grid), pi_gamma(*s.calc, g, f, 4, s.grid)), 1e-12);
}

TEST(PiGamma, UnsupportedWithoutForm) {
  auto s = setup(nondivergence_delta_a(grid1d(6), Field::Constant(6, 1.5)), 10);
  const Field f = random_real_field(6, 1);
  try {
    pi_gamma(*s.calc, f, f, 3, s.grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported_operator);
  }
}

TEST(CarreSplit, ExactUpToQuadratureOnGraphs) {
  for (const auto& gen : {path_laplacian(3), random_graph_laplacian(30, 2)}) {
    auto s = setup(gen);
    for (std::uint64_t k = 0; k < 3; ++k) {
      const Field f = sample_test_function(*s.calc, SamplerKind::spectral_bandlimited, 9, 2 * k);
      const Field g = sample_test_function(*s.calc, SamplerKind::eigenfunction_product, 9, 2 * k + 1);
      EXPECT_LE(carre_split_check(*s.calc, f, g, 4, s.grid), 2e-6);
    }
  }
}

TEST(CarreSplit, TermsSumToResonant) {
  auto s = setup(random_graph_laplacian(12, 5));
  const Field f = random_complex_field(12, 1), g = random_complex_field(12, 2);
  const auto t = carre_split_terms(*s.calc, f, g, 4, s.grid);
  EXPECT_LE(rel(t.first, split_first_term(*s.calc, f, g, 4, s.grid)), 1e-14);
  EXPECT_LE(rel(t.pi_gamma, pi_gamma(*s.calc, f, g, 4, s.grid)), 1e-14);
  EXPECT_LE(rel(t.resonant, resonant_pi(*s.calc, f, g, 4, s.grid)), 1e-14);
}

TEST(CarreSplit, DivergenceFormIsFirstOrderInMesh) {
  auto residual = [](Index n) {
    auto gen = smooth_divergence_1d(n);
    auto s = setup(gen);
    const double h = 1.0 / static_cast<double>(n - 1);
    Field f(n), g(n);
    for (Index i = 0; i < n; ++i) {
      f(i) = std::cos(M_PI * i * h);
      g(i) = std::cos(2 * M_PI * i * h) + 0.3 * std::cos(3 * M_PI * i * h);
    }
    f = mean_free(f, gen->space->mu());
    g = mean_free(g, gen->space->mu());
    return carre_split_check(*s.calc, f, g, 5, s.grid);
  };
  const double r1 = residual(33), r2 = residual(65), r3 = residual(129);
  EXPECT_GT(r1 / r2, 1.4);
  EXPECT_LT(r1 / r2, 2.6);
  EXPECT_GT(r2 / r3, 1.4);
  EXPECT_LT(r2 / r3, 2.6);
}

TEST(Sobolev, TwoPointValue) {
  auto calc = build_calculus(path_laplacian(2));
  EXPECT_NEAR(sobolev_norm(*calc, cfield({1, -1}), 2.0, 1.0), 2.0, 1e-14);
  EXPECT_THROW(sobolev_norm(*calc, cfield({1, -1}), 2.0, 1.5), Error);
  EXPECT_THROW(sobolev_norm(*calc, cfield({1, -1}), 2.0, 0.0), Error);
}

TEST(Leibniz, EqualFactorsFormula) {
  auto calc = build_calculus(random_graph_laplacian(20, 6));
  const Field f = sample_test_function(*calc, SamplerKind::random_bump, 2, 0);
  for (double a : {0.2, 0.7}) {
    const double expect =
        sobolev_norm(*calc, f.cwiseProduct(f), 2.0, a) / (2 * sobolev_norm(*calc, f, 2.0, a) * sup_norm(f));
    EXPECT_NEAR(leibniz_ratio(*calc, f, f, 2.0, a), expect, 1e-14 * expect);
  }
}

TEST(Leibniz, ScaleInvariance) {
  auto calc = build_calculus(grid_laplacian({24}));
  const Field f = sample_test_function(*calc, SamplerKind::spectral_bandlimited, 4, 0);
  const Field g = sample_test_function(*calc, SamplerKind::spectral_bandlimited, 4, 1);
  for (double p : {1.5, 4.0})
    for (double c : {1e-3, 7.0}) {
      const double r = leibniz_ratio(*calc, f, g, p, 0.5);
      EXPECT_NEAR(leibniz_ratio(*calc, c * f, g, p, 0.5), r, 1e-12 * r);
    }
}

TEST(Leibniz, KernelPartOfProductIsReported) {
  auto calc = build_calculus(path_laplacian(2));
  const Field f = cfield({1, -1});
  const auto v = leibniz_terms(*calc, f, f, 2.0, 0.5);
  EXPECT_NEAR(v.product_kernel_norm, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(v.numerator, 0.0, 1e-14);
}

TEST(Leibniz, DegenerateDenominator) {
  auto calc = build_calculus(path_laplacian(3));
  const Field one = Field::Ones(3);
  try {
    leibniz_ratio(*calc, one, one, 2.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_sample);
  }
}
