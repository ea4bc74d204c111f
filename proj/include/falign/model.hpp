#pragma once

// State, forcing, right-hand side and SSP-RK3 time integration of
//
//   u_t + u u' = -Lambda_alpha(rho u) + u Lambda_alpha rho + f,
//   rho_t + (rho u)' = 0,
//
// on the 2 pi torus, plus mollification and the initial-data catalog.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "falign/errors.hpp"
#include "falign/torus_spectral.hpp"

namespace falign {

inline constexpr double kVacuumThreshold = 1e-8;

struct State {
  Field u;
  Field rho;
  double t = 0.0;
  double alpha = 1.0;

  const TorusGrid& grid() const { return u.grid(); }
};

struct DerivedFields {
  Field e;
  Field q;
  Field q_prime;
  Field q_prime_over_rho;
};

inline double mass(const State& s) { return integrate(s.rho); }

/// e = u' - Lambda rho, q = e/rho, q', q'/rho.
inline DerivedFields compute_derived(const State& s) {
  const Field e = derivative(s.u) - frac_laplacian(s.rho, s.alpha);
  for (double r : s.rho.samples())
    if (!(r > 0.0)) throw VacuumError("compute_derived: density is not positive", s.t);
  const Field q = pointwise(e, s.rho, [](double a, double b) { return a / b; });
  const Field qp = derivative(q);
  Field qpr = pointwise(qp, s.rho, [](double a, double b) { return a / b; });
  return {e, q, qp, std::move(qpr)};
}

// ---------------------------------------------------------------------------
// Forcing

enum class ForceKind { zero, bump, trig };

/// External force f(x,t) with analytic x-derivatives.
///  bump: amplitude * chi(t) * sin(k x + phase), chi a C^infinity bump that is
///        1 at the centre of [t_on, t_off] and vanishes outside it.
///  trig: sum_j a_j sin(k_j x + phase_j), independent of t.
struct ForceSpec {
  ForceKind kind = ForceKind::zero;
  double amplitude = 0.0;
  int wavenumber = 1;
  double phase = 0.0;
  double t_on = 0.0;
  double t_off = 1.0;
  std::vector<double> amplitudes;
  std::vector<int> wavenumbers;
  std::vector<double> phases;

  static ForceSpec zero() { return {}; }

  static ForceSpec bump(double amp, int k, double t_on, double t_off, double phase = 0.0) {
    if (!(t_off > t_on)) throw std::invalid_argument("ForceSpec::bump: t_off must exceed t_on");
    ForceSpec f;
    f.kind = ForceKind::bump;
    f.amplitude = amp;
    f.wavenumber = k;
    f.phase = phase;
    f.t_on = t_on;
    f.t_off = t_off;
    return f;
  }

  static ForceSpec trig(std::vector<double> amps, std::vector<int> ks, std::vector<double> phases = {}) {
    if (amps.size() != ks.size()) throw std::invalid_argument("ForceSpec::trig: amplitude/wavenumber count mismatch");
    if (phases.empty()) phases.assign(amps.size(), 0.0);
    if (phases.size() != amps.size()) throw std::invalid_argument("ForceSpec::trig: phase count mismatch");
    ForceSpec f;
    f.kind = ForceKind::trig;
    f.amplitudes = std::move(amps);
    f.wavenumbers = std::move(ks);
    f.phases = std::move(phases);
    return f;
  }

  bool is_zero() const { return kind == ForceKind::zero; }

  std::optional<double> support_end() const {
    if (kind == ForceKind::zero) return 0.0;
    if (kind == ForceKind::bump) return t_off;
    return std::nullopt;
  }

  double time_profile(double t) const {
    if (kind != ForceKind::bump) return 1.0;
    if (t <= t_on || t >= t_off) return 0.0;
    const double s = (2.0 * t - t_on - t_off) / (t_off - t_on);
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
  }

  /// d^order f / dx^order at (x, t).
  double eval(double x, double t, int order = 0) const {
    auto mode = [order](double a, int k, double ph, double x_) {
      const double arg = k * x_ + ph;
      const double kp = std::pow(static_cast<double>(k), order);
      switch (order % 4) {
        case 0: return a * kp * std::sin(arg);
        case 1: return a * kp * std::cos(arg);
        case 2: return -a * kp * std::sin(arg);
        default: return -a * kp * std::cos(arg);
      }
    };
    switch (kind) {
      case ForceKind::zero: return 0.0;
      case ForceKind::bump: return time_profile(t) * mode(amplitude, wavenumber, phase, x);
      case ForceKind::trig: {
        double s = 0.0;
        for (std::size_t j = 0; j < amplitudes.size(); ++j) s += mode(amplitudes[j], wavenumbers[j], phases[j], x);
        return s;
      }
    }
    return 0.0;
  }

  Field field(const TorusGrid& grid, double t, int order = 0) const {
    return Field::from_function(grid, [&](double x) { return eval(x, t, order); });
  }

  /// Upper bound of sup_{x,t} |d^order f/dx^order|; exact for a single mode.
  double sup_bound(int order = 0) const {
    switch (kind) {
      case ForceKind::zero: return 0.0;
      case ForceKind::bump: return std::abs(amplitude) * std::pow(std::abs(wavenumber), order);
      case ForceKind::trig: {
        double s = 0.0;
        for (std::size_t j = 0; j < amplitudes.size(); ++j)
          s += std::abs(amplitudes[j]) * std::pow(std::abs(wavenumbers[j]), order);
        return s;
      }
    }
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// Right-hand side

struct Rhs {
  Field du;
  Field drho;
};

/// du = -u u' - Lambda(rho u) + u Lambda rho + f, drho = -(rho u)'.
inline Rhs rhs(const State& s, const ForceSpec& force) {
  const Field rho_u = dealiased_product(s.rho, s.u);
  Field du = frac_laplacian(rho_u, s.alpha);
  du *= -1.0;
  du -= dealiased_product(s.u, derivative(s.u));
  du += dealiased_product(s.u, frac_laplacian(s.rho, s.alpha));
  if (!force.is_zero()) du += force.field(s.grid(), s.t);
  return {std::move(du), -derivative(rho_u)};
}

/// Same velocity tendency written through e: du = -u e - Lambda(rho u) + f.
inline Field rhs_velocity_e_form(const State& s, const ForceSpec& force) {
  const Field e = derivative(s.u) - frac_laplacian(s.rho, s.alpha);
  Field du = frac_laplacian(dealiased_product(s.rho, s.u), s.alpha);
  du *= -1.0;
  du -= dealiased_product(s.u, e);
  if (!force.is_zero()) du += force.field(s.grid(), s.t);
  return du;
}

/// e_t = -(u e)' + f'.
inline Field rhs_e(const Field& u, const Field& e, const ForceSpec& force, double t) {
  Field de = -derivative(dealiased_product(u, e));
  if (!force.is_zero()) de += force.field(u.grid(), t, 1);
  return de;
}

// ---------------------------------------------------------------------------
// Time stepping

/// dt = cfl * min(h/||u||_inf, 1/(C(alpha) kmax^alpha ||rho||_inf)).
inline double stable_dt(const State& s, double cfl) {
  const TorusGrid& g = s.grid();
  const double kmax = static_cast<double>(g.nyquist());
  const double diss = frac_multiplier_constant(s.alpha) * std::pow(kmax, s.alpha) * max_abs(s.rho);
  const double umax = max_abs(s.u);
  double lim = 1.0 / diss;
  if (umax > 0.0) lim = std::min(lim, g.spacing() / umax);
  return cfl * lim;
}

namespace detail {

inline void check_vacuum(const Field& rho, double t) {
  const double m = *std::min_element(rho.samples().begin(), rho.samples().end());
  if (m <= kVacuumThreshold)
    throw VacuumError("density reached the vacuum threshold (min rho = " + std::to_string(m) + ")", t);
}

// Field arithmetic that reports non-finite results as solver errors.
inline Field combine(double a, const Field& x, double b, const Field& y, double c, const Field& dy, double t,
                     const char* name) {
  std::vector<double> s(x.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = a * x[j] + b * y[j] + c * dy[j];
    if (!std::isfinite(s[j])) throw SolverError(std::string("non-finite value in ") + name, t);
  }
  return Field(x.grid(), std::move(s));
}

}  // namespace detail

/// Optional companion field advanced alongside (u, rho): e via e_t + (ue)' = f'.
struct StepResult {
  State state;
  std::optional<Field> e;
  double dt;
};

/// One SSP-RK3 step of size min(dt_max, stable_dt). If `e` is given it is
/// advanced with the same stages.
inline StepResult step_with(const State& s, const ForceSpec& force, double dt_max, double cfl,
                            const std::optional<Field>& e = std::nullopt) {
  const double dt = std::min(dt_max, stable_dt(s, cfl));
  if (!(dt > 0.0)) throw SolverError("time step collapsed", s.t);
  const double t = s.t;

  const Rhs k1 = rhs(s, force);
  State s1{detail::combine(1.0, s.u, 0.0, s.u, dt, k1.du, t, "u"),
           detail::combine(1.0, s.rho, 0.0, s.rho, dt, k1.drho, t, "rho"), t + dt, s.alpha};
  std::optional<Field> e1;
  if (e) e1 = detail::combine(1.0, *e, 0.0, *e, dt, rhs_e(s.u, *e, force, t), t, "e");

  const Rhs k2 = rhs(s1, force);
  State s2{detail::combine(0.75, s.u, 0.25, s1.u, 0.25 * dt, k2.du, t, "u"),
           detail::combine(0.75, s.rho, 0.25, s1.rho, 0.25 * dt, k2.drho, t, "rho"), t + 0.5 * dt, s.alpha};
  std::optional<Field> e2;
  if (e) e2 = detail::combine(0.75, *e, 0.25, *e1, 0.25 * dt, rhs_e(s1.u, *e1, force, t + dt), t, "e");

  const Rhs k3 = rhs(s2, force);
  State out{detail::combine(1.0 / 3.0, s.u, 2.0 / 3.0, s2.u, 2.0 / 3.0 * dt, k3.du, t, "u"),
            detail::combine(1.0 / 3.0, s.rho, 2.0 / 3.0, s2.rho, 2.0 / 3.0 * dt, k3.drho, t, "rho"), t + dt,
            s.alpha};
  std::optional<Field> e3;
  if (e) e3 = detail::combine(1.0 / 3.0, *e, 2.0 / 3.0, *e2, 2.0 / 3.0 * dt, rhs_e(s2.u, *e2, force, t + 0.5 * dt), t, "e");

  detail::check_vacuum(out.rho, out.t);
  return {std::move(out), std::move(e3), dt};
}

inline State step(const State& s, const ForceSpec& force, double dt_max, double cfl = 0.4) {
  return step_with(s, force, dt_max, cfl).state;
}

// ---------------------------------------------------------------------------
// Mollification

namespace detail {

// Fourier transform of the unit-mass bump Z exp(-1/(1-x^2)) on (-1,1) at
// each xi. The bump is flat to all orders at +-1, so the trapezoidal rule
// converges faster than any power of the node count.
inline std::vector<double> bump_transform(const std::vector<double>& xi) {
  const double xi_max = xi.empty() ? 0.0 : *std::max_element(xi.begin(), xi.end());
  const int m = std::max(4096, static_cast<int>(16.0 * xi_max));
  const double h = 2.0 / m;
  std::vector<double> x, w;
  for (int i = 1; i < m; ++i) {
    const double xx = -1.0 + h * i;
    x.push_back(xx);
    w.push_back(std::exp(-1.0 / (1.0 - xx * xx)));
  }
  double mass = 0.0;
  for (double v : w) mass += v;
  std::vector<double> out(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::cos(xi[k] * x[i]);
    out[k] = s / mass;
  }
  return out;
}

}  // namespace detail

/// Periodic convolution with eta_eps(x) = eta(x/eps)/eps. eps = 0 is the identity.
inline Field mollify(const Field& g, double eps) {
  if (eps < 0.0) throw std::invalid_argument("mollify: eps must be >= 0");
  if (eps == 0.0) return g;
  if (eps >= std::numbers::pi) throw std::invalid_argument("mollify: eps must be below pi");
  std::vector<double> xi(g.grid().n_modes());
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = eps * static_cast<double>(k);
  const auto mult = detail::bump_transform(xi);
  return apply_multiplier(g, [&mult](std::size_t k) { return mult[k]; });
}

// ---------------------------------------------------------------------------
// Initial data catalog

/// Named initial-data recipe. Parameters not given take the defaults below.
///  stationary:    rho = rho_mean, u = u_mean
///  smooth:        rho = rho_mean + rho_amp cos x, u = u_mean + u_amp sin x
///  steep_tanh:    rho = lo + (hi - lo)(1 + tanh(cos(x - x0)/width))/2,
///                 u = u_mean + antiderivative(e_amp cos x + Lambda rho)
///  sawtooth:      rho = rho_mean + rho_amp cos x, u = u_mean + Lanczos-smoothed
///                 sawtooth with `modes` terms and amplitude u_amp
///  random_smooth: random trig polynomials with 1/k^2 decay up to `modes`
struct InitialData {
  std::string name = "smooth";
  std::map<std::string, double> params;
  double mollify_eps = 0.0;
  std::uint64_t seed = 0;
  double floor = kVacuumThreshold;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

struct InitialFields {
  Field u0;
  Field rho0;
  Field e0;
};

inline InitialFields make_initial_data(const TorusGrid& grid, double alpha, const InitialData& d) {
  auto F = [&grid](auto fn) { return Field::from_function(grid, fn); };
  const double rho_mean = d.param("rho_mean", 1.0);
  const double rho_amp = d.param("rho_amp", 0.5);
  const double u_mean = d.param("u_mean", 0.0);
  const double u_amp = d.param("u_amp", 1.0);
  std::optional<Field> u, rho;

  if (d.name == "stationary") {
    rho = Field::constant(grid, rho_mean);
    u = Field::constant(grid, u_mean);
  } else if (d.name == "smooth") {
    rho = F([&](double x) { return rho_mean + rho_amp * std::cos(x); });
    u = F([&](double x) { return u_mean + u_amp * std::sin(x); });
  } else if (d.name == "steep_tanh") {
    const double lo = d.param("rho_lo", 0.5), hi = d.param("rho_hi", 1.5);
    const double w = d.param("width", 0.1), x0 = d.param("x0", 0.0), e_amp = d.param("e_amp", 0.0);
    rho = F([&](double x) { return lo + (hi - lo) * 0.5 * (1.0 + std::tanh(std::cos(x - x0) / w)); });
    const Field e0 = F([&](double x) { return e_amp * std::cos(x); });
    u = antiderivative(e0 + frac_laplacian(*rho, alpha)) + Field::constant(grid, u_mean);
  } else if (d.name == "sawtooth") {
    const int modes = static_cast<int>(d.param("modes", 32));
    rho = F([&](double x) { return rho_mean + rho_amp * std::cos(x); });
    u = F([&](double x) {
      double s = 0.0;
      for (int k = 1; k <= modes; ++k) {
        const double arg = std::numbers::pi * k / (modes + 1);
        s += (std::sin(arg) / arg) * std::sin(k * x) / k;
      }
      return u_mean + u_amp * s;
    });
  } else if (d.name == "random_smooth") {
    const int modes = static_cast<int>(d.param("modes", 8));
    std::mt19937_64 rng(d.seed);
    std::normal_distribution<double> nd;
    std::vector<double> ra(modes + 1), rb(modes + 1), ua(modes + 1), ub(modes + 1);
    for (int k = 1; k <= modes; ++k) {
      const double w = 1.0 / (static_cast<double>(k) * k);
      ra[k] = nd(rng) * w;
      rb[k] = nd(rng) * w;
      ua[k] = nd(rng) * w;
      ub[k] = nd(rng) * w;
    }
    auto series = [modes](const std::vector<double>& a, const std::vector<double>& b, double x) {
      double s = 0.0;
      for (int k = 1; k <= modes; ++k) s += a[k] * std::cos(k * x) + b[k] * std::sin(k * x);
      return s;
    };
    Field rho_osc = F([&](double x) { return series(ra, rb, x); });
    const double osc = max_abs(rho_osc);
    if (osc > 0.0) rho_osc *= rho_amp / osc;
    rho = Field::constant(grid, rho_mean) + rho_osc;
    Field u_osc = F([&](double x) { return series(ua, ub, x); });
    const double uo = max_abs(u_osc);
    if (uo > 0.0) u_osc *= u_amp / uo;
    u = Field::constant(grid, u_mean) + u_osc;
  } else {
    throw ConfigError("unknown initial data '" + d.name + "'");
  }

  if (d.mollify_eps > 0.0) {
    rho = mollify(*rho, d.mollify_eps);
    u = mollify(*u, d.mollify_eps);
  }
  const double rmin = *std::min_element(rho->samples().begin(), rho->samples().end());
  if (rmin < d.floor || rmin <= kVacuumThreshold)
    throw VacuumError("initial density violates the floor (min rho = " + std::to_string(rmin) + ")", 0.0);
  Field e0 = derivative(*u) - frac_laplacian(*rho, alpha);
  return {std::move(*u), std::move(*rho), std::move(e0)};
}

// ---------------------------------------------------------------------------
// Driver

struct SimConfig {
  std::size_t n_points = 256;
  std::size_t padding_factor = 2;
  double alpha = 1.0;
  double t_end = 1.0;
  double cfl_number = 0.4;
  double dt_max = std::numeric_limits<double>::infinity();
  /// Time between saved snapshots.
  double output_stride = 0.1;
  /// Extra snapshot times (merged with the stride grid).
  std::vector<double> output_times;
  InitialData initial;
  ForceSpec force;
  /// Advance e by its conservation law alongside (u, rho) for cross-checking.
  bool evolve_e = false;
};

struct Snapshot {
  State state;
  DerivedFields derived;
  /// e advanced independently (cross-check mode only).
  std::optional<Field> e_evolved;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  ForceSpec force;
  std::size_t steps = 0;
};

inline std::vector<double> output_schedule(const SimConfig& c) {
  std::vector<double> times{0.0};
  if (c.output_stride > 0.0) {
    const auto count = static_cast<std::size_t>(std::llround(std::floor(c.t_end / c.output_stride + 1e-9)));
    for (std::size_t i = 1; i <= count; ++i) times.push_back(std::min(c.t_end, c.output_stride * static_cast<double>(i)));
  }
  for (double t : c.output_times)
    if (t > 0.0 && t <= c.t_end) times.push_back(t);
  times.push_back(c.t_end);
  std::sort(times.begin(), times.end());
  std::vector<double> out;
  for (double t : times)
    if (out.empty() || t - out.back() > 1e-12 * std::max(1.0, c.t_end)) out.push_back(t);
  return out;
}

inline void validate(const SimConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha < 2.0)) throw ConfigError("alpha must lie in (0,2)");
  if (!(c.t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (!(c.cfl_number > 0.0)) throw ConfigError("cfl_number must be positive");
  if (!(c.dt_max > 0.0)) throw ConfigError("dt_max must be positive");
  if (c.output_stride < 0.0) throw ConfigError("output_stride must be >= 0");
  if (c.initial.mollify_eps < 0.0) throw ConfigError("mollify_eps must be >= 0");
  if (c.n_points < 16 || (c.n_points & (c.n_points - 1)) != 0) throw ConfigError("n_points must be a power of two >= 16");
  if (c.padding_factor < 2) throw ConfigError("padding_factor must be >= 2");
}

using SnapshotObserver = std::function<void(const Snapshot&)>;

/// Integrate from the configured initial data to t_end, landing exactly on
/// every scheduled output time.
inline Trajectory evolve_from(const SimConfig& c, State s0, const SnapshotObserver& observer = {}) {
  validate(c);
  Trajectory traj;
  traj.force = c.force;
  std::optional<Field> e;
  if (c.evolve_e) e = compute_derived(s0).e;

  auto emit = [&](const State& s) {
    Snapshot snap{s, compute_derived(s), e};
    if (observer) observer(snap);
    traj.snapshots.push_back(std::move(snap));
  };

  State s = std::move(s0);
  emit(s);
  const auto schedule = output_schedule(c);
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    const double target = schedule[i];
    while (s.t < target) {
      const double remaining = target - s.t;
      StepResult r = step_with(s, c.force, std::min(c.dt_max, remaining), c.cfl_number, e);
      // Snap to the output time to avoid accumulating round-off in t.
      if (target - r.state.t < 1e-12 * std::max(1.0, target)) r.state.t = target;
      s = std::move(r.state);
      e = std::move(r.e);
      ++traj.steps;
    }
    emit(s);
  }
  return traj;
}

inline State initial_state(const SimConfig& c) {
  validate(c);
  const TorusGrid grid(c.n_points, c.padding_factor);
  InitialFields init = make_initial_data(grid, c.alpha, c.initial);
  return State{std::move(init.u0), std::move(init.rho0), 0.0, c.alpha};
}

inline Trajectory evolve(const SimConfig& c, const SnapshotObserver& observer = {}) {
  return evolve_from(c, initial_state(c), observer);
}

}  // namespace falign
