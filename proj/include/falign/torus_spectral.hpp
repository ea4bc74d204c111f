#pragma once

// Fourier machinery on the 2*pi-periodic torus: grid, fields, transforms,
// derivatives, the fractional Laplacian multiplier, sharp Littlewood-Paley
// blocks, Besov/Hoelder seminorms and dealiased products.
//
// Fourier convention: ghat(k) = (1/n) sum_j g_j exp(-i k x_j) for
// k = 0..n/2, so ghat(0) is the mean and the inverse is a plain sum. The
// Nyquist coefficient ghat(n/2) is real and stands for ghat(n/2) cos(n x / 2).

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "falign/errors.hpp"

namespace falign {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Complex = std::complex<double>;
using Modes = std::vector<Complex>;

class TorusGrid {
 public:
  explicit TorusGrid(std::size_t n_points, std::size_t padding_factor = 2)
      : n_(n_points), padding_(padding_factor) {
    if (n_ < 16 || !std::has_single_bit(n_))
      throw std::invalid_argument("TorusGrid: n_points must be a power of two >= 16, got " +
                                  std::to_string(n_));
    if (padding_ < 2) throw std::invalid_argument("TorusGrid: padding_factor must be >= 2");
  }

  std::size_t n_points() const noexcept { return n_; }
  std::size_t padding_factor() const noexcept { return padding_; }
  std::size_t padded_points() const noexcept { return n_ * padding_; }
  std::size_t n_modes() const noexcept { return n_ / 2 + 1; }
  std::size_t nyquist() const noexcept { return n_ / 2; }
  double period() const noexcept { return kTwoPi; }
  double spacing() const noexcept { return kTwoPi / static_cast<double>(n_); }
  double node(std::size_t j) const noexcept { return kTwoPi * static_cast<double>(j) / static_cast<double>(n_); }

  /// Largest LP block index with at least one resolved mode (holds the Nyquist mode).
  int max_block() const noexcept { return static_cast<int>(std::bit_width(n_ / 2)) - 1; }

  bool operator==(const TorusGrid&) const = default;

 private:
  std::size_t n_;
  std::size_t padding_;
};

/// Real scalar function sampled at the nodes of a TorusGrid.
class Field {
 public:
  Field(const TorusGrid& grid, std::vector<double> samples) : grid_(grid), samples_(std::move(samples)) {
    if (samples_.size() != grid_.n_points())
      throw std::invalid_argument("Field: sample count does not match grid");
    for (double v : samples_)
      if (!std::isfinite(v)) throw std::invalid_argument("Field: non-finite sample");
  }

  static Field constant(const TorusGrid& grid, double value) {
    return Field(grid, std::vector<double>(grid.n_points(), value));
  }

  template <class F>
  static Field from_function(const TorusGrid& grid, F&& f) {
    std::vector<double> s(grid.n_points());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = f(grid.node(j));
    return Field(grid, std::move(s));
  }

  const TorusGrid& grid() const noexcept { return grid_; }
  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t j) const noexcept { return samples_[j]; }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] += o.samples_[j];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] -= o.samples_[j];
    return *this;
  }
  Field& operator*=(double c) {
    for (double& v : samples_) v *= c;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Field a, double c) { return a *= c; }
  friend Field operator*(double c, Field a) { return a *= c; }
  friend Field operator-(Field a) { return a *= -1.0; }

  /// a + c*b without a temporary.
  Field& add_scaled(double c, const Field& b) {
    check_same(b);
    for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] += c * b.samples_[j];
    return *this;
  }

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_)) throw GridMismatch("fields live on different grids");
  }

 private:
  TorusGrid grid_;
  std::vector<double> samples_;
};

/// Pointwise map of one or more fields (no dealiasing).
template <class F>
Field pointwise(const Field& a, F&& f) {
  std::vector<double> s(a.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = f(a[j]);
  return Field(a.grid(), std::move(s));
}

template <class F>
Field pointwise(const Field& a, const Field& b, F&& f) {
  a.check_same(b);
  std::vector<double> s(a.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = f(a[j], b[j]);
  return Field(a.grid(), std::move(s));
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// One r2c/c2r plan pair with private buffers. fftw_execute on a plan is
// thread-safe; plan creation and destruction are not, hence the mutex.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    real_ = fftw_alloc_real(n_);
    spec_ = fftw_alloc_complex(n_ / 2 + 1);
    const int ni = static_cast<int>(n_);
    fwd_ = fftw_plan_dft_r2c_1d(ni, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(ni, spec_, real_, FFTW_ESTIMATE);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  void forward(std::span<const double> in, Modes& out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(fwd_);
    const double inv_n = 1.0 / static_cast<double>(n_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = Complex(spec_[k][0], spec_[k][1]) * inv_n;
    out[n_ / 2].imag(0.0);
  }

  void inverse(std::span<const Complex> in, std::span<double> out) {
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    spec_[0][1] = 0.0;
    spec_[n_ / 2][1] = 0.0;
    fftw_execute(bwd_);
    std::copy(real_, real_ + n_, out.begin());
  }

 private:
  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

inline FftPlan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

inline Modes forward_samples(std::span<const double> s) {
  Modes m;
  plan_for(s.size()).forward(s, m);
  return m;
}

inline std::vector<double> inverse_samples(std::span<const Complex> m, std::size_t n) {
  std::vector<double> s(n);
  plan_for(n).inverse(m, s);
  return s;
}

// Zero-pad a length-n spectrum to length big (both powers of two). The
// n-grid Nyquist coefficient c means c cos(n x/2); on the larger grid it is
// a regular mode pair, stored as c/2.
inline Modes pad_modes(std::span<const Complex> m, std::size_t n, std::size_t big) {
  Modes out(big / 2 + 1, Complex(0.0, 0.0));
  for (std::size_t k = 0; k < n / 2; ++k) out[k] = m[k];
  out[n / 2] = Complex(0.5 * m[n / 2].real(), 0.0);
  return out;
}

// Inverse of pad_modes: drop |k| > n/2 and fold the +-n/2 pair into the
// n-grid Nyquist coefficient (the sine part vanishes at the n-grid nodes).
inline Modes truncate_modes(std::span<const Complex> big_modes, std::size_t n) {
  Modes out(n / 2 + 1);
  for (std::size_t k = 0; k < n / 2; ++k) out[k] = big_modes[k];
  out[n / 2] = Complex(2.0 * big_modes[n / 2].real(), 0.0);
  return out;
}

}  // namespace detail

inline Modes transform_forward(const Field& field) { return detail::forward_samples(field.samples()); }

inline Field transform_inverse(const TorusGrid& grid, std::span<const Complex> modes) {
  if (modes.size() != grid.n_modes()) throw std::invalid_argument("transform_inverse: mode count mismatch");
  return Field(grid, detail::inverse_samples(modes, grid.n_points()));
}

/// Multiply mode k (k = 0..n/2) by mult(k) and transform back.
template <class Mult>
Field apply_multiplier(const Field& field, Mult&& mult) {
  Modes m = transform_forward(field);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] *= mult(k);
  return transform_inverse(field.grid(), m);
}

inline Field derivative(const Field& field) {
  const std::size_t nyq = field.grid().nyquist();
  return apply_multiplier(field, [nyq](std::size_t k) {
    return k == nyq ? Complex(0.0, 0.0) : Complex(0.0, static_cast<double>(k));
  });
}

/// Zero-mean antiderivative. The mean of `field` is discarded.
inline Field antiderivative(const Field& field) {
  const std::size_t nyq = field.grid().nyquist();
  return apply_multiplier(field, [nyq](std::size_t k) {
    return (k == 0 || k == nyq) ? Complex(0.0, 0.0) : Complex(0.0, -1.0 / static_cast<double>(k));
  });
}

/// Value of the trig interpolant of `field` at x + shift, i.e. g(. + shift).
inline Field shift(const Field& field, double s) {
  return apply_multiplier(field, [s](std::size_t k) {
    return std::exp(Complex(0.0, static_cast<double>(k) * s));
  });
}

// ---------------------------------------------------------------------------
// Fractional Laplacian

namespace detail {

inline double compute_frac_constant(double alpha) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr double tol = 1e-14;

  // [0,1]: subtract s^2/2 from (1 - cos s); its integral is 1/(2(2 - alpha)).
  auto near = [alpha](double s) {
    if (s <= 0.0) return 0.0;
    double rem;
    if (s < 0.1) {
      const double s2 = s * s;
      rem = s2 * s2 * (-1.0 / 24.0 + s2 * (1.0 / 720.0 + s2 * (-1.0 / 40320.0 + s2 / 3628800.0)));
    } else {
      const double h = std::sin(0.5 * s);
      rem = 2.0 * h * h - 0.5 * s * s;
    }
    return rem * std::pow(s, -1.0 - alpha);
  };
  const double inner = 0.5 / (2.0 - alpha) + gauss_kronrod<double, 31>::integrate(near, 0.0, 1.0, 20, tol);

  // [1, inf): int s^{-1-a} = 1/a, minus the oscillatory cosine part, which is
  // integrated per period up to L = 2 pi P and closed with its asymptotic series.
  const double beta = 1.0 + alpha;
  auto osc = [beta](double s) { return std::cos(s) * std::pow(s, -beta); };
  constexpr int periods = 64;
  double cos_part = gauss_kronrod<double, 31>::integrate(osc, 1.0, kTwoPi, 20, tol);
  for (int p = 1; p < periods; ++p)
    cos_part += gauss_kronrod<double, 31>::integrate(osc, kTwoPi * p, kTwoPi * (p + 1), 20, tol);
  const double L = kTwoPi * periods;
  // int_L^inf cos(s) s^-b ds = b L^{-b-1} - b(b+1)(b+2) L^{-b-3} + ...
  double coef = beta, tail = 0.0, sign = 1.0;
  for (int j = 0; j < 6; ++j) {
    tail += sign * coef * std::pow(L, -beta - 2.0 * j - 1.0);
    coef *= (beta + 2.0 * j + 1.0) * (beta + 2.0 * j + 2.0);
    sign = -sign;
  }
  cos_part += tail;
  // Even integrand: double the half-line value.
  return 2.0 * (inner + 1.0 / alpha - cos_part);
}

}  // namespace detail

/// C(alpha) = int_R (1 - cos s)/|s|^{1+alpha} ds, so that
/// Lambda_alpha e^{ikx} = C(alpha) |k|^alpha e^{ikx}. Cached per alpha.
inline double frac_multiplier_constant(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::domain_error("frac_multiplier_constant: alpha must lie in (0,2)");
  static std::mutex mutex;
  static std::map<double, double> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(alpha); it != cache.end()) return it->second;
  }
  const double c = detail::compute_frac_constant(alpha);
  std::lock_guard lock(mutex);
  cache.emplace(alpha, c);
  return c;
}

/// Lambda_alpha as the multiplier C(alpha)|k|^alpha (Nyquist mode zeroed).
inline Field frac_laplacian(const Field& field, double alpha) {
  const double c = frac_multiplier_constant(alpha);
  const std::size_t nyq = field.grid().nyquist();
  return apply_multiplier(field, [c, alpha, nyq](std::size_t k) {
    return k == nyq ? 0.0 : c * std::pow(static_cast<double>(k), alpha);
  });
}

/// Operator square root of Lambda_alpha: sqrt(C(alpha)) |k|^{alpha/2}.
inline Field frac_laplacian_half(const Field& field, double alpha) {
  const double c = std::sqrt(frac_multiplier_constant(alpha));
  const std::size_t nyq = field.grid().nyquist();
  return apply_multiplier(field, [c, alpha, nyq](std::size_t k) {
    return k == nyq ? 0.0 : c * std::pow(static_cast<double>(k), 0.5 * alpha);
  });
}

// ---------------------------------------------------------------------------
// Littlewood-Paley blocks (sharp cutoffs)

/// Half-open wavenumber range [lo, hi) of block q: q = -1 is k = 0,
/// q >= 0 is 2^q <= |k| < 2^{q+1}.
struct LPBlockSpec {
  int q;

  explicit LPBlockSpec(int q_) : q(q_) {
    if (q < -1) throw std::invalid_argument("LPBlockSpec: q must be >= -1");
  }
  std::size_t lo() const noexcept { return q < 0 ? 0 : std::size_t{1} << q; }
  std::size_t hi() const noexcept { return q < 0 ? 1 : std::size_t{1} << (q + 1); }
  double lambda() const noexcept { return std::ldexp(1.0, q); }
  bool contains(std::size_t k) const noexcept { return k >= lo() && k < hi(); }
};

inline Field lp_project(const Field& field, int q) {
  const LPBlockSpec b(q);
  return apply_multiplier(field, [&b](std::size_t k) { return b.contains(k) ? 1.0 : 0.0; });
}

/// g_{<=Q}: all modes |k| < 2^{Q+1}.
inline Field lp_low(const Field& field, int Q) {
  if (Q < -1) throw std::invalid_argument("lp_low: Q must be >= -1");
  const std::size_t hi = LPBlockSpec(Q).hi();
  return apply_multiplier(field, [hi](std::size_t k) { return k < hi ? 1.0 : 0.0; });
}

/// g_{>Q} = g - g_{<=Q}.
inline Field lp_high(const Field& field, int Q) {
  if (Q < -1) throw std::invalid_argument("lp_high: Q must be >= -1");
  const std::size_t hi = LPBlockSpec(Q).hi();
  return apply_multiplier(field, [hi](std::size_t k) { return k < hi ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------------------
// Quadrature, norms, seminorms

/// Trapezoidal quadrature of g over the torus.
inline double integrate(const Field& g) {
  double s = 0.0;
  for (double v : g.samples()) s += v;
  return s * g.grid().spacing();
}

inline double inner_product(const Field& a, const Field& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s * a.grid().spacing();
}

inline double max_abs(const Field& g) {
  double m = 0.0;
  for (double v : g.samples()) m = std::max(m, std::abs(v));
  return m;
}

/// L^p norm by the trapezoidal rule; p = infinity gives the node maximum.
inline double lp_norm(const Field& g, double p) {
  if (std::isinf(p)) return max_abs(g);
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  double s = 0.0;
  for (double v : g.samples()) s += std::pow(std::abs(v), p);
  return std::pow(s * g.grid().spacing(), 1.0 / p);
}

/// ||g_q||_{L^p} for q = -1..max_block; entry i holds block q = i - 1.
inline std::vector<double> block_norms(const Field& g, double p) {
  std::vector<double> out;
  for (int q = -1; q <= g.grid().max_block(); ++q) out.push_back(lp_norm(lp_project(g, q), p));
  return out;
}

/// || lambda_q^s ||g_q||_{L^p} ||_{l^r} over q = -1..max_block (r may be infinity).
inline double besov_seminorm(const Field& g, double s, double p, double r) {
  if (!(r >= 1.0)) throw std::invalid_argument("besov_seminorm: r must be >= 1");
  const auto norms = block_norms(g, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const double v = std::pow(LPBlockSpec(static_cast<int>(i) - 1).lambda(), s) * norms[i];
    acc = std::isinf(r) ? std::max(acc, v) : acc + std::pow(v, r);
  }
  return std::isinf(r) ? acc : std::pow(acc, 1.0 / r);
}

/// Discrete Hoelder seminorm over all node pairs with periodic distance. O(n^2).
inline double holder_seminorm(const Field& g, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("holder_seminorm: gamma must lie in (0,1]");
  const std::size_t n = g.size();
  const double h = g.grid().spacing();
  double best = 0.0;
  for (std::size_t m = 1; m <= n / 2; ++m) {
    const double w = std::pow(h * static_cast<double>(m), -gamma);
    double dmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) dmax = std::max(dmax, std::abs(g[j] - g[(j + m) % n]));
    best = std::max(best, dmax * w);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Extrema of the trigonometric interpolant

struct Extrema {
  double min;
  double max;
  double argmin;
  double argmax;
};

namespace detail {

// p(x), p'(x), p''(x) of the trig interpolant defined by modes m on an n-grid.
inline std::array<double, 3> trig_eval(std::span<const Complex> m, std::size_t n, double x) {
  double v = m[0].real(), d1 = 0.0, d2 = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double kk = static_cast<double>(k);
    const Complex e = m[k] * std::exp(Complex(0.0, kk * x));
    v += 2.0 * e.real();
    d1 -= 2.0 * kk * e.imag();
    d2 -= 2.0 * kk * kk * e.real();
  }
  const double kn = static_cast<double>(n / 2);
  v += m[n / 2].real() * std::cos(kn * x);
  d1 -= m[n / 2].real() * kn * std::sin(kn * x);
  d2 -= m[n / 2].real() * kn * kn * std::cos(kn * x);
  return {v, d1, d2};
}

inline double polish_extremum(std::span<const Complex> m, std::size_t n, double x0, double bracket, double& value) {
  double x = x0;
  value = trig_eval(m, n, x)[0];
  for (int it = 0; it < 20; ++it) {
    const auto p = trig_eval(m, n, x);
    if (p[2] == 0.0) break;
    const double step = p[1] / p[2];
    const double xn = x - step;
    if (std::abs(xn - x0) > bracket) break;
    x = xn;
    if (std::abs(step) < 1e-15) break;
  }
  const double v = trig_eval(m, n, x)[0];
  value = v;
  return x;
}

}  // namespace detail

/// Min and max of the band-limited interpolant of `g`, located by 8x spectral
/// upsampling and polished by Newton on the derivative. Never less extreme
/// than the node values.
inline Extrema field_extrema(const Field& g) {
  const std::size_t n = g.size();
  const std::size_t big = 8 * n;
  const Modes m = transform_forward(g);
  const Modes padded = detail::pad_modes(m, n, big);
  const auto fine = detail::inverse_samples(padded, big);
  const auto [lo_it, hi_it] = std::minmax_element(fine.begin(), fine.end());
  const double hf = kTwoPi / static_cast<double>(big);

  Extrema ex{};
  double vmax = 0.0, vmin = 0.0;
  ex.argmax = detail::polish_extremum(m, n, hf * static_cast<double>(hi_it - fine.begin()), 2.0 * hf, vmax);
  ex.argmin = detail::polish_extremum(m, n, hf * static_cast<double>(lo_it - fine.begin()), 2.0 * hf, vmin);
  const auto [nlo, nhi] = std::minmax_element(g.samples().begin(), g.samples().end());
  ex.max = std::max({vmax, *hi_it, *nhi});
  ex.min = std::min({vmin, *lo_it, *nlo});
  return ex;
}

inline double sup_norm(const Field& g) {
  const Extrema e = field_extrema(g);
  return std::max(std::abs(e.min), std::abs(e.max));
}

// ---------------------------------------------------------------------------
// Dealiased products

namespace detail {

inline std::vector<double> padded_samples(const Field& a) {
  const std::size_t n = a.size(), big = a.grid().padded_points();
  return inverse_samples(pad_modes(transform_forward(a), n, big), big);
}

inline Field truncate_to(const TorusGrid& grid, std::span<const double> big_samples) {
  const Modes big = forward_samples(big_samples);
  return transform_inverse(grid, truncate_modes(big, grid.n_points()));
}

}  // namespace detail

/// Product a*b evaluated on the padded grid and truncated back to n modes.
inline Field dealiased_product(const Field& a, const Field& b) {
  a.check_same(b);
  auto pa = detail::padded_samples(a);
  const auto pb = detail::padded_samples(b);
  for (std::size_t j = 0; j < pa.size(); ++j) pa[j] *= pb[j];
  return detail::truncate_to(a.grid(), pa);
}

inline Field dealiased_product(const Field& a, const Field& b, const Field& c) {
  a.check_same(b);
  a.check_same(c);
  auto pa = detail::padded_samples(a);
  const auto pb = detail::padded_samples(b);
  const auto pc = detail::padded_samples(c);
  for (std::size_t j = 0; j < pa.size(); ++j) pa[j] *= pb[j] * pc[j];
  return detail::truncate_to(a.grid(), pa);
}

}  // namespace falign
