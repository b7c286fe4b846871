// Paraproduct decomposition of f*g on the two-point graph with f = g = (1, -1).
#include "paralab/paralab.hpp"

#include <cstdio>

using namespace paralab;

int main() {
  auto space = build_graph_space({{0, 1, 1.0}}, RVec::Ones(2));
  auto calc = build_calculus(graph_laplacian(space));
  const auto grid = adapted_grid(*calc);
  Field f(2);
  f << 1.0, -1.0;
  const int D = 5;
  const auto t = product_terms(*calc, f, f, D, grid);
  const Field pg = pi_gamma(*calc, f, f, D, grid);
  auto show = [](const char* name, const Field& v) {
    std::printf("%-10s (% .12f, % .12f)\n", name, v(0).real(), v(1).real());
  };
  show("f*g", f.cwiseProduct(f));
  show("Pi(f,g)", t.resonant);
  show("Pi_g(f)", t.pi_g_f);
  show("Pi_f(g)", t.pi_f_g);
  show("Pi_Gamma", pg);
  std::printf("residual   %.3e\n", relative_product_residual(*calc, f.cwiseProduct(f), t, 2.0));
}
