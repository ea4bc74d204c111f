// Spectral vs real-space fractional Laplacian, and a few kernel values.

#include <cmath>
#include <cstdio>
#include <numbers>

#include "falign/alignment_kernel.hpp"

using namespace falign;

int main() {
  std::printf("%6s %14s %14s %14s\n", "alpha", "C(alpha)", "phi(pi)", "iota(pi)");
  for (double a : {0.25, 0.5, 1.0, 1.5, 1.75}) {
    const KernelSpec spec{a};
    std::printf("%6.2f %14.10f %14.10f %14.10f\n", a, frac_multiplier_constant(a), phi(std::numbers::pi, spec),
                iota(std::numbers::pi, spec));
  }

  const TorusGrid grid(128);
  const Field g = Field::from_function(grid, [](double x) { return std::exp(std::sin(x)) + 0.3 * std::cos(3 * x); });
  std::printf("\nLambda_alpha g, g = exp(sin x) + 0.3 cos 3x, n = %zu\n", grid.n_points());
  std::printf("%6s %16s\n", "alpha", "max rel diff");
  for (double a : {0.4, 0.8, 1.0, 1.2, 1.6}) {
    const Field s = frac_laplacian(g, a);
    const Field q = frac_laplacian_quadrature(g, KernelSpec{a});
    double diff = 0.0;
    for (std::size_t j = 0; j < grid.n_points(); ++j) diff = std::max(diff, std::abs(s[j] - q[j]));
    std::printf("%6.2f %16.3e\n", a, diff / max_abs(s));
  }
}
