#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "falign/torus_spectral.hpp"

using namespace falign;
using std::numbers::pi;

namespace {

Field random_field(const TorusGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> s(g.n_points());
  for (double& v : s) v = nd(rng);
  return Field(g, std::move(s));
}

// Smooth random trig polynomial with modes up to kmax.
Field random_smooth(const TorusGrid& g, unsigned seed, int kmax) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> a(kmax + 1), b(kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    a[k] = nd(rng) / (1 + k * k);
    b[k] = nd(rng) / (1 + k * k);
  }
  return Field::from_function(g, [&](double x) {
    double s = a[0];
    for (int k = 1; k <= kmax; ++k) s += a[k] * std::cos(k * x) + b[k] * std::sin(k * x);
    return s;
  });
}

double max_diff(const Field& a, const Field& b) { return max_abs(a - b); }

// Closed form of int_R (1 - cos s)/|s|^{1+a} ds.
double frac_constant_closed_form(double a) { return pi / (std::tgamma(1.0 + a) * std::sin(pi * a / 2.0)); }

}  // namespace

TEST(TorusGrid, RejectsBadSizes) {
  EXPECT_THROW(TorusGrid(8), std::invalid_argument);
  EXPECT_THROW(TorusGrid(48), std::invalid_argument);
  EXPECT_THROW(TorusGrid(64, 1), std::invalid_argument);
  const TorusGrid g(64);
  EXPECT_DOUBLE_EQ(g.spacing(), 2 * pi / 64);
  EXPECT_DOUBLE_EQ(g.node(16), pi / 2);
  EXPECT_EQ(g.max_block(), 5);
}

TEST(Field, RejectsNonFinite) {
  const TorusGrid g(16);
  std::vector<double> s(16, 1.0);
  s[3] = std::nan("");
  EXPECT_THROW(Field(g, s), std::invalid_argument);
  EXPECT_THROW(Field(g, std::vector<double>(15, 0.0)), std::invalid_argument);
}

TEST(Field, GridMismatchIsReported) {
  const Field a = Field::constant(TorusGrid(16), 1.0);
  const Field b = Field::constant(TorusGrid(32), 1.0);
  EXPECT_THROW(a + b, GridMismatch);
  EXPECT_THROW(dealiased_product(a, b), GridMismatch);
}

TEST(Transform, ConstantAndSingleMode) {
  const TorusGrid g(64);
  const Modes c = transform_forward(Field::constant(g, 3.5));
  EXPECT_NEAR(c[0].real(), 3.5, 1e-15);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LT(std::abs(c[k]), 1e-15);

  const Modes m = transform_forward(Field::from_function(g, [](double x) { return std::cos(x); }));
  EXPECT_NEAR(m[1].real(), 0.5, 1e-15);
  for (std::size_t k = 0; k < m.size(); ++k)
    if (k != 1) {
      EXPECT_LT(std::abs(m[k]), 1e-15);
    }
}

TEST(Transform, RoundTripAndParseval) {
  const TorusGrid g(128);
  const Field f = random_field(g, 7);
  const Field back = transform_inverse(g, transform_forward(f));
  EXPECT_LT(max_diff(f, back), 1e-12 * max_abs(f));

  const Modes m = transform_forward(f);
  double spec = std::norm(m[0]) + std::norm(m[g.nyquist()]);
  for (std::size_t k = 1; k < g.nyquist(); ++k) spec += 2 * std::norm(m[k]);
  const double quad = integrate(pointwise(f, [](double v) { return v * v; }));
  EXPECT_NEAR(2 * pi * spec, quad, 1e-10 * quad);
}

TEST(Derivative, Examples) {
  const TorusGrid g(64);
  auto F = [&](auto fn) { return Field::from_function(g, fn); };
  EXPECT_LT(max_diff(derivative(F([](double x) { return std::cos(x); })), F([](double x) { return -std::sin(x); })),
            1e-12);
  EXPECT_LT(max_abs(derivative(Field::constant(g, 2.0))), 1e-14);
  EXPECT_LT(max_diff(derivative(F([](double x) { return std::sin(3 * x); })),
                     F([](double x) { return 3 * std::cos(3 * x); })),
            1e-12);
  // Nyquist mode differentiates to zero.
  EXPECT_LT(max_abs(derivative(F([](double x) { return std::cos(32 * x); }))), 1e-12);
}

TEST(Derivative, AntiderivativeInverts) {
  const TorusGrid g(64);
  const Field f = random_smooth(g, 3, 10);
  const Field fp = derivative(f);
  const Field back = antiderivative(fp);
  const double mean = integrate(f) / (2 * pi);
  EXPECT_LT(max_diff(back + Field::constant(g, mean), f), 1e-12);
}

TEST(Shift, MovesSingleMode) {
  const TorusGrid g(32);
  const Field f = Field::from_function(g, [](double x) { return std::sin(2 * x); });
  const Field s = shift(f, 0.3);
  EXPECT_LT(max_diff(s, Field::from_function(g, [](double x) { return std::sin(2 * (x + 0.3)); })), 1e-13);
}

TEST(FracConstant, MatchesClosedForm) {
  EXPECT_NEAR(frac_multiplier_constant(1.0), pi, 1e-10 * pi);
  for (double a : {0.05, 0.1, 0.3, 0.5, 0.75, 1.25, 1.5, 1.8, 1.95}) {
    const double ref = frac_constant_closed_form(a);
    EXPECT_NEAR(frac_multiplier_constant(a), ref, 1e-10 * ref) << "alpha = " << a;
    EXPECT_GT(frac_multiplier_constant(a), 0.0);
  }
}

TEST(FracConstant, SmallAlphaProductStaysBounded) {
  // C(a) a -> 2 as a -> 0.
  EXPECT_NEAR(frac_multiplier_constant(0.1) * 0.1, 2.0, 0.2);
  EXPECT_NEAR(frac_multiplier_constant(0.05) * 0.05, 2.0, 0.1);
}

TEST(FracConstant, RejectsOutOfRange) {
  EXPECT_THROW(frac_multiplier_constant(0.0), std::domain_error);
  EXPECT_THROW(frac_multiplier_constant(2.0), std::domain_error);
}

TEST(FracLaplacian, ConstantsAndSingleModes) {
  const TorusGrid g(64);
  EXPECT_LT(max_abs(frac_laplacian(Field::constant(g, 5.0), 0.7)), 1e-13);
  const Field c = Field::from_function(g, [](double x) { return std::cos(x); });
  EXPECT_LT(max_diff(frac_laplacian(c, 1.0), c * pi), 1e-10);
  const Field c3 = Field::from_function(g, [](double x) { return std::cos(3 * x); });
  const double a = 1.4;
  EXPECT_LT(max_diff(frac_laplacian(c3, a), c3 * (frac_constant_closed_form(a) * std::pow(3.0, a))), 1e-9);
}

TEST(FracLaplacian, SymmetricPositiveMeanFree) {
  const TorusGrid g(128);
  for (double a : {0.3, 1.0, 1.7}) {
    const Field f = random_field(g, 11), h = random_field(g, 12);
    const double fl = inner_product(f, frac_laplacian(h, a));
    const double lf = inner_product(h, frac_laplacian(f, a));
    EXPECT_NEAR(fl, lf, 1e-10 * std::abs(fl) + 1e-12);
    EXPECT_GE(inner_product(f, frac_laplacian(f, a)), 0.0);
    EXPECT_LT(std::abs(integrate(frac_laplacian(f, a))), 1e-12 * max_abs(frac_laplacian(f, a)));
  }
}

TEST(FracLaplacian, HalfOperatorSquares) {
  const TorusGrid g(64);
  const Field f = random_smooth(g, 5, 20);
  const Field twice = frac_laplacian_half(frac_laplacian_half(f, 0.8), 0.8);
  EXPECT_LT(max_diff(twice, frac_laplacian(f, 0.8)), 1e-11 * max_abs(frac_laplacian(f, 0.8)));
}

TEST(LittlewoodPaley, BlockMembership) {
  const TorusGrid g(64);
  const Field c4 = Field::from_function(g, [](double x) { return std::cos(4 * x); });
  EXPECT_LT(max_diff(lp_project(c4, 2), c4), 1e-14);
  for (int q : {-1, 0, 1, 3, 4, 5}) EXPECT_LT(max_abs(lp_project(c4, q)), 1e-14) << q;
  const Field k = Field::constant(g, 2.5);
  EXPECT_LT(max_diff(lp_project(k, -1), k), 1e-14);
  EXPECT_THROW(lp_project(k, -2), std::invalid_argument);
}

TEST(LittlewoodPaley, PartitionIsExact) {
  const TorusGrid g(128);
  const Field f = random_field(g, 21);
  Field sum = Field::constant(g, 0.0);
  for (int q = -1; q <= g.max_block(); ++q) sum += lp_project(f, q);
  EXPECT_LT(max_diff(sum, f), 1e-12 * max_abs(f));
  EXPECT_LT(max_diff(lp_low(f, g.max_block()), f), 1e-12 * max_abs(f));
  for (int Q = -1; Q <= g.max_block(); ++Q) {
    Field rest = lp_low(f, Q);
    for (int q = Q + 1; q <= g.max_block(); ++q) rest += lp_project(f, q);
    EXPECT_LT(max_diff(rest, f), 1e-12 * max_abs(f)) << Q;
    EXPECT_LT(max_diff(lp_low(f, Q) + lp_high(f, Q), f), 1e-12 * max_abs(f));
  }
}

TEST(Besov, SingleModeAndPlancherel) {
  const TorusGrid g(128);
  const Field c8 = Field::from_function(g, [](double x) { return std::cos(8 * x); });
  // |cos|^4 is a trig polynomial, so the trapezoidal L^4 norm is exact: (3 pi / 4)^{1/4}.
  const double cos_l4 = std::pow(0.75 * pi, 0.25);
  EXPECT_NEAR(besov_seminorm(c8, 0.7, 4.0, 2.0), std::pow(8.0, 0.7) * cos_l4, 1e-12);
  EXPECT_NEAR(besov_seminorm(c8, 0.7, 4.0, INFINITY), std::pow(8.0, 0.7) * cos_l4, 1e-12);

  const Field f = random_field(g, 9);
  EXPECT_NEAR(besov_seminorm(f, 0.0, 2.0, 2.0), lp_norm(f, 2.0), 1e-10 * lp_norm(f, 2.0));
}

TEST(Besov, OnsagerCriticalSequenceIsFlat) {
  // u = sum_q 2^{-q/3} cos(2^q x) has d_q = ||cos||_{L^3} = (8/3)^{1/3} for every q >= 0,
  // up to trapezoidal error in |cos|^3 (a C^2 function) that grows with 2^q / n.
  const TorusGrid g(256);
  const Field u = Field::from_function(g, [](double x) {
    double s = 0.0;
    for (int q = 0; q <= 5; ++q) s += std::pow(2.0, -q / 3.0) * std::cos(std::ldexp(1.0, q) * x);
    return s;
  });
  const double ref = std::cbrt(8.0 / 3.0);
  for (int q = 0; q <= 5; ++q) {
    const double d = std::pow(2.0, q / 3.0) * lp_norm(lp_project(u, q), 3.0);
    EXPECT_NEAR(d, ref, 5e-3 * ref) << q;
  }
}

TEST(Holder, ConstantsAndLipschitz) {
  const TorusGrid g(256);
  EXPECT_EQ(holder_seminorm(Field::constant(g, 1.0), 0.5), 0.0);
  const Field s = Field::from_function(g, [](double x) { return std::sin(x); });
  EXPECT_NEAR(holder_seminorm(s, 1.0), 1.0, 1e-3);
  EXPECT_THROW(holder_seminorm(s, 0.0), std::invalid_argument);
}

TEST(Holder, MatchesExhaustivePairScan) {
  const TorusGrid g(32);
  const Field f = random_field(g, 4);
  for (double gamma : {0.1, 0.25, 0.5, 1.0}) {
    double best = 0.0;
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 32; ++j) {
        if (i == j) continue;
        double d = std::abs(g.node(i) - g.node(j));
        d = std::min(d, 2 * pi - d);
        best = std::max(best, std::abs(f[i] - f[j]) / std::pow(d, gamma));
      }
    EXPECT_NEAR(holder_seminorm(f, gamma), best, 1e-12 * best);
  }
}

TEST(Extrema, TrigInterpolantMax) {
  const TorusGrid g(32);
  // Peak of cos(x - 0.05) sits between nodes.
  const Field f = Field::from_function(g, [](double x) { return std::cos(x - 0.05); });
  const Extrema e = field_extrema(f);
  EXPECT_NEAR(e.max, 1.0, 1e-13);
  EXPECT_NEAR(e.argmax, 0.05, 1e-8);
  EXPECT_NEAR(e.min, -1.0, 1e-13);
  EXPECT_NEAR(sup_norm(f), 1.0, 1e-13);
}

TEST(DealiasedProduct, TrigIdentities) {
  const TorusGrid g(64);
  const Field c = Field::from_function(g, [](double x) { return std::cos(x); });
  EXPECT_LT(max_diff(dealiased_product(c, c), Field::from_function(g, [](double x) { return 0.5 + 0.5 * std::cos(2 * x); })),
            1e-14);
  EXPECT_LT(max_diff(dealiased_product(c, Field::constant(g, 1.0)), c), 1e-14);
  EXPECT_LT(max_diff(dealiased_product(c, c, c),
                     Field::from_function(g, [](double x) { return 0.75 * std::cos(x) + 0.25 * std::cos(3 * x); })),
            1e-14);
}

TEST(DealiasedProduct, ExactForHalfBandInputs) {
  // Inputs band-limited to n/4 have products resolvable on the n-grid; the
  // dealiased product then equals the pointwise product at the nodes.
  const TorusGrid g(64);
  const Field a = random_smooth(g, 1, 15), b = random_smooth(g, 2, 15);
  const Field direct = pointwise(a, b, [](double x, double y) { return x * y; });
  EXPECT_LT(max_diff(dealiased_product(a, b), direct), 1e-13);
}

TEST(DealiasedProduct, RemovesAliasedModes) {
  // cos(12x)^2 on n = 32 aliases cos(24x) onto k = 8; the dealiased product keeps only the mean.
  const TorusGrid g(32);
  const Field c = Field::from_function(g, [](double x) { return std::cos(12 * x); });
  const Field p = dealiased_product(c, c);
  EXPECT_LT(max_diff(p, Field::constant(g, 0.5)), 1e-14);
}
