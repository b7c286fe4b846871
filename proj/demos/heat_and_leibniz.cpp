// Heat kernel decay and Leibniz ratios on a 1D grid.
#include "paralab/paralab.hpp"

#include <cstdio>

using namespace paralab;

int main() {
  const Index n = 128;
  auto space = build_grid_space({n}, 1.0, false);
  auto calc = build_calculus(graph_laplacian(space));
  std::printf("nu_fit %.3f\n", doubling_profile(*space).nu_fit);

  const CMat K = calc->heat_kernel(16.0);
  std::printf("p_16(64, 64 + k):");
  for (Index k : {0, 4, 8, 16}) std::printf(" %.3e", std::abs(K(64, 64 + k)));
  std::printf("\n");

  const Field f = sample_test_function(*calc, SamplerKind::spectral_bandlimited, 1, 0);
  const Field g = sample_test_function(*calc, SamplerKind::random_bump, 1, 1);
  std::printf("%6s %6s %10s %s\n", "p", "alpha", "ratio", "main region");
  for (double p : {1.5, 4.0})
    for (double a : {0.25, 0.75})
      std::printf("%6.2f %6.2f %10.5f %s\n", p, a, leibniz_ratio(*calc, f, g, p, a),
                  inside_main_region(p, a, 2.0) ? "yes" : "no");
}
