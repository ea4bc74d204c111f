#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "falign/alignment_kernel.hpp"

using namespace falign;
using std::numbers::pi;

namespace {

// phi_1(z) = sum_k (z + 2 pi k)^{-2} = 1 / (4 sin^2(z/2)).
double phi1_closed_form(double z) {
  const double s = std::sin(z / 2);
  return 1.0 / (4 * s * s);
}

// Brute lattice sum with a first-order integral tail; only good to ~1e-9.
double phi_brute(double z, double alpha) {
  const double beta = 1 + alpha;
  const long K = 200000;
  double s = 0.0;
  for (long k = K; k >= 1; --k) s += std::pow(2 * pi * k + z, -beta) + std::pow(2 * pi * k - z, -beta);
  s += std::pow(2 * pi * (K + 0.5) + z, -alpha) / (2 * pi * alpha) + std::pow(2 * pi * (K + 0.5) - z, -alpha) / (2 * pi * alpha);
  return s + std::pow(std::abs(z), -beta);
}

std::vector<Field> smooth_family(const TorusGrid& g) {
  return {
      Field::from_function(g, [](double x) { return std::exp(-std::cos(x)); }),
      Field::from_function(g, [](double x) { return std::exp(std::sin(2 * x)) / 3.0; }),
      Field::from_function(g, [](double x) { return 1.0 / (1.5 + std::cos(x)); }),
      Field::from_function(g, [](double x) { return std::sin(3 * x) + 0.5 * std::cos(5 * x); }),
      Field::from_function(g, [](double x) { return std::tanh(2 * std::cos(x)); }),
  };
}

}  // namespace

TEST(Phi, MatchesClosedFormAtAlphaOne) {
  const KernelSpec spec{1.0};
  EXPECT_NEAR(phi(pi, spec), 0.25, 1e-10 * 0.25);
  for (double z : {0.01, 0.3, 1.0, 2.0, 3.0}) EXPECT_NEAR(phi(z, spec), phi1_closed_form(z), 1e-10 * phi1_closed_form(z));
}

TEST(Phi, MatchesBruteSum) {
  for (double a : {0.3, 0.8, 1.5}) {
    const KernelSpec spec{a};
    for (double z : {0.2, 1.3, pi}) {
      const double ref = phi_brute(z, a);
      EXPECT_NEAR(phi(z, spec), ref, 1e-8 * ref) << a << " " << z;
    }
  }
}

TEST(Phi, EvenDominatesPrincipalTermAndIsPeriodic) {
  for (double a : {0.4, 1.0, 1.6}) {
    const KernelSpec spec{a};
    for (double z : {0.1, 0.9, 2.5, pi}) {
      EXPECT_DOUBLE_EQ(phi(z, spec), phi(-z, spec));
      EXPECT_GE(phi(z, spec), std::pow(z, -1 - a));
      EXPECT_NEAR(phi(z + 2 * pi, spec), phi(z, spec), 1e-12 * phi(z, spec));
    }
  }
  EXPECT_THROW(phi(0.0, KernelSpec{}), std::domain_error);
  EXPECT_THROW(phi(2 * pi, KernelSpec{}), std::domain_error);
}

TEST(Phi, StableUnderTruncationDoubling) {
  for (double a : {0.2, 1.0, 1.9}) {
    const KernelSpec s1{a, 64}, s2{a, 128};
    for (double z : {0.05, 1.0, pi}) EXPECT_NEAR(phi(z, s1), phi(z, s2), 1e-10 * phi(z, s1));
  }
  EXPECT_THROW(phi(1.0, KernelSpec{1.0, 32}), std::domain_error);
}

TEST(Iota, ValuesAndMonotonicity) {
  const KernelSpec spec{1.0};
  EXPECT_NEAR(iota(pi, spec), 0.25, 1e-10);
  double prev = iota(0.01, spec);
  for (int i = 2; i <= 100; ++i) {
    const double v = iota(pi * i / 100, spec);
    EXPECT_GE(prev, v);
    prev = v;
  }
  EXPECT_THROW(iota(0.0, spec), std::domain_error);
  EXPECT_THROW(iota(3.2, spec), std::domain_error);
}

TEST(Iota, TwoSidedBoundBelowR0) {
  for (double a : {0.3, 1.0, 1.7}) {
    const KernelSpec spec{a};
    const KernelRadius kr = kernel_radius(spec);
    EXPECT_GT(kr.r0, 0.0);
    EXPECT_LE(kr.r0, pi);
    EXPECT_NEAR(kr.regular_sup, phi(pi, spec) - std::pow(pi, -1 - a), 1e-12);
    for (int i = 0; i < 40; ++i) {
      const double r = kr.r0 * std::pow(10.0, -3.0 * i / 40.0) * (1 - 1e-9);
      const double lo = std::pow(r, -1 - a);
      EXPECT_LE(lo, iota(r, spec));
      EXPECT_LE(iota(r, spec), 2 * lo);
    }
  }
  // alpha = 1: C = 1/4 - 1/pi^2.
  EXPECT_NEAR(kernel_radius(KernelSpec{1.0}).r0, std::pow(0.25 - 1 / (pi * pi), -0.5), 1e-10);
}

TEST(FiniteDifference, FornbergRecoversDerivatives) {
  const TorusGrid g(128);
  const Field f = Field::from_function(g, [](double x) { return std::sin(2 * x); });
  const auto d = fd_derivatives(f, 4);
  for (std::size_t j = 0; j < g.n_points(); ++j) {
    const double x = g.node(j);
    EXPECT_NEAR(d[1][j], 2 * std::cos(2 * x), 1e-9);
    EXPECT_NEAR(d[2][j], -4 * std::sin(2 * x), 1e-8);
    EXPECT_NEAR(d[4][j], 16 * std::sin(2 * x), 1e-5);
  }
}

TEST(FracLaplacianQuadrature, ConstantAndCosine) {
  const TorusGrid g(512);
  const KernelSpec spec{1.0};
  EXPECT_LT(max_abs(frac_laplacian_quadrature(Field::constant(g, 3.0), spec)), 1e-10);
  const Field c = Field::from_function(g, [](double x) { return std::cos(x); });
  EXPECT_LT(max_abs(frac_laplacian_quadrature(c, spec) - c * pi), 1e-4);
}

TEST(FracLaplacianQuadrature, AgreesWithSpectral) {
  for (double a : {0.5, 1.0, 1.5}) {
    const TorusGrid g(512);
    const KernelSpec spec{a};
    for (const Field& f : smooth_family(g)) {
      const Field s = frac_laplacian(f, a);
      EXPECT_LT(max_abs(frac_laplacian_quadrature(f, spec) - s), 1e-5 * max_abs(s)) << a;
    }
  }
}

TEST(FracLaplacianQuadrature, ConvergesAtLeastSecondOrder) {
  const double a = 0.8;
  const KernelSpec spec{a};
  auto err = [&](std::size_t n) {
    const TorusGrid g(n);
    const Field f = Field::from_function(g, [](double x) { return std::exp(-std::cos(x)); });
    return max_abs(frac_laplacian_quadrature(f, spec) - frac_laplacian(f, a));
  };
  const double e32 = err(32), e64 = err(64);
  EXPECT_GT(std::log2(e32 / e64), 2.0);
}

TEST(DAlpha, NonnegativeAndVanishesOnConstants) {
  const TorusGrid g(128);
  const KernelSpec spec{1.2};
  EXPECT_LT(max_abs(d_alpha(Field::constant(g, 1.0), spec)), 1e-12);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> s(128);
  for (double& v : s) v = nd(rng);
  const Field d = d_alpha(Field(g, s), spec);
  for (double v : d.samples()) EXPECT_GE(v, 0.0);
}

TEST(DAlpha, IntegratesToTwiceDirichletForm) {
  // int D_alpha g = 2 int g Lambda g.
  const TorusGrid g(256);
  for (double a : {0.6, 1.0, 1.4}) {
    const KernelSpec spec{a};
    const Field f = Field::from_function(g, [](double x) { return std::exp(std::sin(x)); });
    const double ref = 2 * inner_product(f, frac_laplacian(f, a));
    EXPECT_NEAR(integrate(d_alpha(f, spec)), ref, 1e-6 * ref) << a;
  }
}

TEST(WeightedDoubleIntegral, ProductWeightMatchesDirichletForm) {
  const TorusGrid g(256);
  const KernelSpec spec{1.0};
  const Field one = Field::constant(g, 1.0);
  const Field u = Field::from_function(g, [](double x) { return std::cos(x); });
  EXPECT_NEAR(weighted_double_integral(one, u, PairWeight::product, spec), 2 * pi * pi, 1e-8);
  // Doubling rho scales by four (product) or two (sum).
  const Field rho = Field::from_function(g, [](double x) { return 1 + 0.5 * std::cos(x); });
  const double p1 = weighted_double_integral(rho, u, PairWeight::product, spec);
  EXPECT_NEAR(weighted_double_integral(rho * 2.0, u, PairWeight::product, spec), 4 * p1, 1e-10 * p1);
  const double s1 = weighted_double_integral(rho, u, PairWeight::sum, spec);
  EXPECT_NEAR(weighted_double_integral(rho * 2.0, u, PairWeight::sum, spec), 2 * s1, 1e-10 * s1);
}

TEST(Nlmp, RatioPositiveOnFamily) {
  const TorusGrid g(256);
  for (double a : {0.5, 1.0, 1.5}) {
    const KernelSpec spec{a};
    for (const Field& f : smooth_family(g)) EXPECT_GT(nlmp_ratio(f, spec), 0.0);
  }
  EXPECT_THROW(nlmp_ratio(Field::constant(g, 1.0), KernelSpec{}), std::domain_error);
}
