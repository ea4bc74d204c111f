#pragma once

// Periodized singular kernel phi_alpha(z) = sum_k |z + 2 pi k|^{-1-alpha},
// its infimum profile iota(r), and direct real-space quadratures of the
// fractional operators built on it. These quadratures share no code with the
// spectral path and are used to cross-check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/special_functions/zeta.hpp>

#include "falign/torus_spectral.hpp"

namespace falign {

struct KernelSpec {
  double alpha = 1.0;
  int truncation_terms = 64;
  double tail_tolerance = 1e-12;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("KernelSpec: alpha must lie in (0,2)");
    if (truncation_terms < 64) throw std::domain_error("KernelSpec: truncation_terms must be >= 64");
    if (!(tail_tolerance > 0.0)) throw std::domain_error("KernelSpec: tail_tolerance must be positive");
  }
};

namespace detail {

// sum_{k > K} (2 pi k + z)^{-beta} by Euler-Maclaurin at k = K.
// Returns {value, size of the first omitted correction}.
inline std::pair<double, double> lattice_tail(double z, double beta, int K) {
  const double a = kTwoPi * K + z;
  double s = std::pow(a, 1.0 - beta) / (kTwoPi * (beta - 1.0)) - 0.5 * std::pow(a, -beta);
  // g^{(m)}(K) = (-1)^m beta(beta+1)...(beta+m-1) (2 pi)^m a^{-beta-m}
  static constexpr double bernoulli_over_fact[] = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0,
                                                   1.0 / 47900160.0};
  double rising = beta;  // beta (beta+1) ... up to order 2j-1
  int order = 1;
  double last = 0.0;
  for (int j = 0; j < 5; ++j) {
    const double deriv = -rising * std::pow(kTwoPi, order) * std::pow(a, -beta - order);
    const double term = -bernoulli_over_fact[j] * deriv;
    if (j < 4) s += term;
    else last = std::abs(term);
    rising *= (beta + order) * (beta + order + 1);
    order += 2;
  }
  return {s, last};
}

// Reduce z to (-pi, pi].
inline double wrap_torus(double z) {
  double w = std::remainder(z, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

}  // namespace detail

/// phi_alpha(z) for z not congruent to 0 mod 2 pi. Direct sum over |k| <= K
/// plus an Euler-Maclaurin tail; K doubles until the tail error estimate is
/// below spec.tail_tolerance.
inline double phi(double z, const KernelSpec& spec) {
  spec.validate();
  const double w = detail::wrap_torus(z);
  if (w == 0.0) throw std::domain_error("phi: kernel is singular at z = 0");
  const double beta = 1.0 + spec.alpha;
  const double x = std::abs(w);
  int K = spec.truncation_terms;
  for (;;) {
    const auto [tp, ep] = detail::lattice_tail(x, beta, K);
    const auto [tm, em] = detail::lattice_tail(-x, beta, K);
    if (ep + em <= spec.tail_tolerance || K > (1 << 20)) {
      // Sum small terms first.
      double s = tp + tm;
      for (int k = K; k >= 1; --k)
        s += std::pow(kTwoPi * k + x, -beta) + std::pow(kTwoPi * k - x, -beta);
      return s + std::pow(x, -beta);
    }
    K *= 2;
  }
}

/// phi_alpha(z) - |z|^{-1-alpha}: the regular part of the kernel (k != 0 terms).
inline double phi_regular(double z, const KernelSpec& spec) {
  const double x = std::abs(detail::wrap_torus(z));
  if (x == 0.0) {
    const double beta = 1.0 + spec.alpha;
    return 2.0 * boost::math::zeta(beta) * std::pow(kTwoPi, -beta);
  }
  return phi(x, spec) - std::pow(x, -1.0 - spec.alpha);
}

namespace detail {

// Confirms phi is strictly decreasing on (0, pi] on a fine sample. Cached per alpha.
inline void audit_phi_monotone(const KernelSpec& spec) {
  static std::mutex mutex;
  static std::map<double, bool> audited;
  {
    std::lock_guard lock(mutex);
    if (audited.count(spec.alpha)) {
      if (!audited[spec.alpha]) throw std::logic_error("phi is not monotone on (0,pi]");
      return;
    }
  }
  constexpr int samples = 2048;
  bool ok = true;
  double prev = phi(std::numbers::pi / samples, spec);
  for (int i = 2; i <= samples; ++i) {
    const double v = phi(std::numbers::pi * i / samples, spec);
    if (!(v < prev)) ok = false;
    prev = v;
  }
  std::lock_guard lock(mutex);
  audited[spec.alpha] = ok;
  if (!ok) throw std::logic_error("phi is not monotone on (0,pi]");
}

}  // namespace detail

/// iota(r) = inf_{|x| < r} phi_alpha(x) = phi_alpha(r), since phi is even and
/// decreasing on (0, pi] (audited numerically on first use).
inline double iota(double r, const KernelSpec& spec) {
  if (!(r > 0.0 && r <= std::numbers::pi)) throw std::domain_error("iota: r must lie in (0, pi]");
  detail::audit_phi_monotone(spec);
  return phi(r, spec);
}

/// The constant C = sup_{0 < r <= pi} (phi(r) - r^{-1-alpha}) and the radius r0 with
/// r0^{-1-alpha} = C, below which r^{-1-alpha} <= iota(r) <= 2 r^{-1-alpha}.
struct KernelRadius {
  double regular_sup;
  double r0;
};

inline KernelRadius kernel_radius(const KernelSpec& spec) {
  constexpr int samples = 1024;
  double sup = 0.0;
  for (int i = 1; i <= samples; ++i) sup = std::max(sup, phi_regular(std::numbers::pi * i / samples, spec));
  const double r0 = std::min(std::numbers::pi, std::pow(sup, -1.0 / (1.0 + spec.alpha)));
  return {sup, r0};
}

/// phi(z_m) for the node offsets z_m = m h wrapped to (-pi, pi], m = 1..n-1.
/// Entry 0 is unused and set to 0.
inline std::vector<double> kernel_node_table(const TorusGrid& grid, const KernelSpec& spec) {
  const std::size_t n = grid.n_points();
  std::vector<double> t(n, 0.0);
  for (std::size_t m = 1; m <= n / 2; ++m) {
    t[m] = phi(grid.node(m), spec);
    t[n - m] = t[m];
  }
  return t;
}

// ---------------------------------------------------------------------------
// Finite-difference derivatives (independent of the FFT path)

namespace detail {

/// Fornberg weights w[d][j] for derivative order d <= max_order at 0 using
/// integer offsets[j].
inline std::vector<std::vector<double>> fornberg_weights(int max_order, const std::vector<double>& offsets) {
  const int np = static_cast<int>(offsets.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(np, 0.0));
  double c1 = 1.0, c4 = offsets[0];
  c[0][0] = 1.0;
  for (int i = 1; i < np; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = offsets[i] - offsets[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace detail

/// Periodic centered finite-difference derivatives g^{(d)} at the nodes for
/// d = 0..max_order, with a stencil of 2*half_width+1 points.
inline std::vector<std::vector<double>> fd_derivatives(const Field& g, int max_order, int half_width = 6) {
  const int n = static_cast<int>(g.size());
  std::vector<double> offs;
  for (int j = -half_width; j <= half_width; ++j) offs.push_back(j);
  const auto w = detail::fornberg_weights(max_order, offs);
  const double h = g.grid().spacing();
  std::vector<std::vector<double>> out(max_order + 1, std::vector<double>(n, 0.0));
  for (int d = 0; d <= max_order; ++d) {
    const double scale = std::pow(h, -d);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = -half_width; j <= half_width; ++j) s += w[d][j + half_width] * g[((i + j) % n + n) % n];
      out[d][i] = s * scale;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct quadratures

/// Lambda_alpha g(x_j) = sum_{m != 0} (g_j - g_{j+m}) phi(z_m) h, plus the
/// generalized Euler-Maclaurin corrections for the excluded singular node.
inline Field frac_laplacian_quadrature(const Field& g, const KernelSpec& spec) {
  const TorusGrid& grid = g.grid();
  const std::size_t n = grid.n_points();
  const double h = grid.spacing();
  const double a = spec.alpha;
  const auto table = kernel_node_table(grid, spec);
  const auto der = fd_derivatives(g, 4);
  const double z2 = boost::math::zeta(a - 1.0) * std::pow(h, 2.0 - a);
  const double z4 = boost::math::zeta(a - 3.0) * std::pow(h, 4.0 - a) / 12.0;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t m = 1; m < n; ++m) s += (g[j] - g[(j + m) % n]) * table[m];
    out[j] = s * h + z2 * der[2][j] + z4 * der[4][j];
  }
  return Field(grid, std::move(out));
}

namespace detail {

// Correction to the node sum of a(z) d(z)^2 phi(z) h over m != 0, where
// d(z) = g(x) - g(x+z) and a(z) = A0 + A1 z + A2 z^2 + ... near z = 0.
// Uses d^2 = B2 z^2 + B3 z^3 + B4 z^4 + ...
inline double square_singular_correction(double A0, double A1, double A2, double g1, double g2, double g3,
                                         double alpha, double h) {
  const double B2 = g1 * g1, B3 = g1 * g2, B4 = 0.25 * g2 * g2 + g1 * g3 / 3.0;
  return -2.0 * boost::math::zeta(alpha - 1.0) * A0 * B2 * std::pow(h, 2.0 - alpha) -
         2.0 * boost::math::zeta(alpha - 3.0) * (A0 * B4 + A1 * B3 + A2 * B2) * std::pow(h, 4.0 - alpha);
}

}  // namespace detail

/// D_alpha g(y) = int_R |g(y) - g(y+z)|^2 / |z|^{1+alpha} dz at every node.
inline Field d_alpha(const Field& g, const KernelSpec& spec) {
  const TorusGrid& grid = g.grid();
  const std::size_t n = grid.n_points();
  const double h = grid.spacing();
  const auto table = kernel_node_table(grid, spec);
  const auto der = fd_derivatives(g, 3);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
      const double d = g[j] - g[(j + m) % n];
      s += d * d * table[m];
    }
    out[j] = std::max(0.0, s * h + detail::square_singular_correction(1.0, 0.0, 0.0, der[1][j], der[2][j],
                                                                       der[3][j], spec.alpha, h));
  }
  return Field(grid, std::move(out));
}

/// int_T int_T w(x, x+z) |g(x) - g(x+z)|^2 phi(z) dz dx for the weights used by
/// the energy laws: product weight rho(x) rho(y) or sum weight rho(x) + rho(y).
enum class PairWeight { product, sum };

inline double weighted_double_integral(const Field& rho, const Field& g, PairWeight weight, const KernelSpec& spec) {
  rho.check_same(g);
  const TorusGrid& grid = g.grid();
  const std::size_t n = grid.n_points();
  const double h = grid.spacing();
  const auto table = kernel_node_table(grid, spec);
  const auto dg = fd_derivatives(g, 3);
  const auto dr = fd_derivatives(rho, 2);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
      const std::size_t i = (j + m) % n;
      const double d = g[j] - g[i];
      const double w = weight == PairWeight::product ? rho[j] * rho[i] : rho[j] + rho[i];
      s += w * d * d * table[m];
    }
    double A0, A1, A2;
    if (weight == PairWeight::product) {
      A0 = rho[j] * rho[j];
      A1 = rho[j] * dr[1][j];
      A2 = 0.5 * rho[j] * dr[2][j];
    } else {
      A0 = 2.0 * rho[j];
      A1 = dr[1][j];
      A2 = 0.5 * dr[2][j];
    }
    total += s * h + detail::square_singular_correction(A0, A1, A2, dg[1][j], dg[2][j], dg[3][j], spec.alpha, h);
  }
  return total * h;
}

/// Ratio D_alpha g'(x*) ||g||_inf^alpha / |g'(x*)|^{2+alpha} at the node x* maximizing
/// |g'|; the infimum of this over a family estimates the nonlinear maximum
/// principle constant.
inline double nlmp_ratio(const Field& g, const KernelSpec& spec) {
  const Field gp = derivative(g);
  std::size_t jmax = 0;
  for (std::size_t j = 1; j < gp.size(); ++j)
    if (std::abs(gp[j]) > std::abs(gp[jmax])) jmax = j;
  const double slope = std::abs(gp[jmax]);
  if (slope == 0.0) throw std::domain_error("nlmp_ratio: g is constant");
  const Field d = d_alpha(gp, spec);
  return d[jmax] * std::pow(max_abs(g), spec.alpha) / std::pow(slope, 2.0 + spec.alpha);
}

}  // namespace falign
