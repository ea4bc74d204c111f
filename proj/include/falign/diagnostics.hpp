#pragma once

// Scalar diagnostics per snapshot and per run: conservation, energy laws,
// the explicit L^infinity bounds, alignment, Hoelder smoothing and flocking.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/statistics/linear_regression.hpp>

#include "falign/alignment_kernel.hpp"
#include "falign/model.hpp"
#include "falign/torus_spectral.hpp"

namespace falign {

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  std::size_t points = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [c0, c1] = boost::math::statistics::simple_ordinary_least_squares(x, y);
  return {c0, c1, x.size()};
}

/// Trapezoidal cumulative integral of y(t); out[0] = 0.
inline std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return out;
}

// ---------------------------------------------------------------------------
// Per-snapshot record

struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double momentum = 0.0;
  double energy = 0.0;
  double rho_energy = 0.0;
  double dissipation = 0.0;
  double rho_dissipation = 0.0;
  double alignment = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  double u_inf_norm = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double q_inf_norm = 0.0;
  double e_inf_norm = 0.0;
  double e_integral = 0.0;
  double u_prime_inf_norm = 0.0;
  double rho_prime_inf_norm = 0.0;
  /// int rho u f
  double force_power = 0.0;
  /// int rho f
  double force_momentum = 0.0;
  /// int e rho^2
  double e_rho_squared = 0.0;
  /// Filled by compute_records from the whole run.
  double energy_residual = 0.0;
  double rho_energy_residual = 0.0;
  std::vector<double> rho_holder;
};

/// D = int [2 rho u Lambda(rho u) - rho u^2 Lambda rho - rho Lambda(rho u^2)]
/// = int int rho(x) rho(y) |u(x) - u(y)|^2 K(x - y).
inline double dissipation_spectral(const State& s) {
  const Field ru = dealiased_product(s.rho, s.u);
  const Field ruu = dealiased_product(s.rho, s.u, s.u);
  return 2.0 * inner_product(ru, frac_laplacian(ru, s.alpha)) - inner_product(ruu, frac_laplacian(s.rho, s.alpha)) -
         inner_product(s.rho, frac_laplacian(ruu, s.alpha));
}

/// int rho^2 Lambda rho = (1/2) int int (rho(x) + rho(y)) |rho(x) - rho(y)|^2 K(x - y).
inline double rho_dissipation_spectral(const State& s) {
  return inner_product(dealiased_product(s.rho, s.rho), frac_laplacian(s.rho, s.alpha));
}

/// Direct double quadrature of int int rho(x) rho(y) |u(x) - u(y)|^2 phi(x - y).
inline double dissipation_double_integral(const State& s, const KernelSpec& spec) {
  return weighted_double_integral(s.rho, s.u, PairWeight::product, spec);
}

/// Direct double quadrature of (1/2) int int (rho(x) + rho(y)) |rho(x) - rho(y)|^2 phi(x - y).
inline double rho_dissipation_double_integral(const State& s, const KernelSpec& spec) {
  return 0.5 * weighted_double_integral(s.rho, s.rho, PairWeight::sum, spec);
}

inline DiagnosticsRecord compute_record(const State& s, const DerivedFields& d, const ForceSpec& force,
                                        const std::vector<double>& holder_gammas = {}) {
  DiagnosticsRecord r;
  r.t = s.t;
  r.mass = integrate(s.rho);
  const Field ru = dealiased_product(s.rho, s.u);
  r.momentum = integrate(ru);
  r.energy = 0.5 * inner_product(ru, s.u);
  r.rho_energy = inner_product(s.rho, s.rho);
  r.dissipation = dissipation_spectral(s);
  r.rho_dissipation = rho_dissipation_spectral(s);
  const Extrema ue = field_extrema(s.u);
  r.alignment = ue.max - ue.min;
  r.u_inf_norm = std::max(std::abs(ue.max), std::abs(ue.min));
  const Extrema re = field_extrema(s.rho);
  r.rho_min = re.min;
  r.rho_max = re.max;
  const Extrema qe = field_extrema(d.q);
  r.q_min = qe.min;
  r.q_max = qe.max;
  r.q_inf_norm = std::max(std::abs(qe.min), std::abs(qe.max));
  r.e_inf_norm = sup_norm(d.e);
  r.e_integral = integrate(d.e);
  r.u_prime_inf_norm = sup_norm(derivative(s.u));
  r.rho_prime_inf_norm = sup_norm(derivative(s.rho));
  if (!force.is_zero()) {
    const Field f = force.field(s.grid(), s.t);
    r.force_power = inner_product(ru, f);
    r.force_momentum = inner_product(s.rho, f);
  }
  r.e_rho_squared = inner_product(d.e, dealiased_product(s.rho, s.rho));
  for (double g : holder_gammas) r.rho_holder.push_back(holder_seminorm(s.rho, g));
  return r;
}

// ---------------------------------------------------------------------------
// Energy laws over a run

/// Residuals of
///   E(t) + (1/2) int_0^t D = E(0) + int_0^t int rho u f,
///   int rho^2(t) + int_0^t int rho^2 Lambda rho = int rho_0^2 - int_0^t int e rho^2,
/// with time integrals by the trapezoidal rule over the records. `relative`
/// divides by E(0) + (1/2) int_0^T D (resp. int rho_0^2 + int_0^T int rho^2 Lambda rho).
/// `alternative` uses dissipation coefficient 1 instead of 1/2.
struct EnergyResidual {
  std::vector<double> t;
  std::vector<double> absolute;
  std::vector<double> relative;
  std::vector<double> alternative_relative;
  std::vector<double> rho_absolute;
  std::vector<double> rho_relative;
  /// Cumulative (1/2) int_0^t D.
  std::vector<double> total_dissipation;

  static double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double max_relative() const { return max_abs(relative); }
  double max_alternative_relative() const { return max_abs(alternative_relative); }
  double max_rho_relative() const { return max_abs(rho_relative); }
  /// True when the 1/2 normalization closes better than the alternative.
  bool half_normalization_closes() const { return max_relative() <= max_alternative_relative(); }
};

inline EnergyResidual energy_residual(const std::vector<DiagnosticsRecord>& recs) {
  EnergyResidual r;
  if (recs.empty()) return r;
  std::vector<double> t, D, P, RD, ER;
  for (const auto& x : recs) {
    t.push_back(x.t);
    D.push_back(x.dissipation);
    P.push_back(x.force_power);
    RD.push_back(x.rho_dissipation);
    ER.push_back(x.e_rho_squared);
  }
  const auto iD = cumulative_trapezoid(t, D), iP = cumulative_trapezoid(t, P);
  const auto iRD = cumulative_trapezoid(t, RD), iER = cumulative_trapezoid(t, ER);
  const double E0 = recs.front().energy, R0 = recs.front().rho_energy;
  const double scale = E0 + 0.5 * iD.back();
  const double scale_alt = E0 + iD.back();
  const double rscale = R0 + iRD.back();
  r.t = t;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double res = recs[i].energy + 0.5 * iD[i] - E0 - iP[i];
    const double alt = recs[i].energy + iD[i] - E0 - iP[i];
    const double rres = recs[i].rho_energy + iRD[i] + iER[i] - R0;
    r.absolute.push_back(res);
    r.relative.push_back(scale > 0.0 ? res / scale : res);
    r.alternative_relative.push_back(scale_alt > 0.0 ? alt / scale_alt : alt);
    r.rho_absolute.push_back(rres);
    r.rho_relative.push_back(rscale > 0.0 ? rres / rscale : rres);
    r.total_dissipation.push_back(0.5 * iD[i]);
  }
  return r;
}

inline std::vector<DiagnosticsRecord> compute_records(const Trajectory& traj,
                                                      const std::vector<double>& holder_gammas = {}) {
  std::vector<DiagnosticsRecord> out;
  out.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) out.push_back(compute_record(s.state, s.derived, traj.force, holder_gammas));
  const EnergyResidual er = energy_residual(out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].energy_residual = er.relative[i];
    out[i].rho_energy_residual = er.rho_relative[i];
  }
  return out;
}

/// Drifts over a run: mass relative to M(0); int e absolute; momentum
/// relative to M(0) ||u_0||_inf after removing int_0^t int rho f.
struct ConservationReport {
  double mass_drift = 0.0;
  double e_integral_drift = 0.0;
  double momentum_drift = 0.0;
};

inline ConservationReport conservation_report(const std::vector<DiagnosticsRecord>& recs) {
  ConservationReport c;
  if (recs.empty()) return c;
  std::vector<double> t, fm;
  for (const auto& r : recs) {
    t.push_back(r.t);
    fm.push_back(r.force_momentum);
  }
  const auto ifm = cumulative_trapezoid(t, fm);
  const double M0 = recs.front().mass;
  const double pscale = M0 * std::max(recs.front().u_inf_norm, 1.0);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    c.mass_drift = std::max(c.mass_drift, std::abs(recs[i].mass - M0) / M0);
    c.e_integral_drift = std::max(c.e_integral_drift, std::abs(recs[i].e_integral - recs.front().e_integral));
    c.momentum_drift =
        std::max(c.momentum_drift, std::abs(recs[i].momentum - recs.front().momentum - ifm[i]) / pscale);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Explicit L^infinity bounds

struct BoundConstants {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double iota_pi = 0.0;
  double r0 = 0.0;
  double mass = 0.0;
  double u0_inf = 0.0;
  double q0_inf = 0.0;
  double f_inf = 0.0;
  double fprime_inf = 0.0;
};

/// Constants of the L^infinity proposition evaluated from the initial state.
inline BoundConstants compute_bound_constants(const State& s0, const ForceSpec& force) {
  const KernelSpec spec{s0.alpha};
  BoundConstants b;
  b.iota_pi = iota(std::numbers::pi, spec);
  b.r0 = kernel_radius(spec).r0;
  b.mass = integrate(s0.rho);
  const DerivedFields d = compute_derived(s0);
  const Extrema re = field_extrema(s0.rho);
  b.u0_inf = sup_norm(s0.u);
  b.q0_inf = sup_norm(d.q);
  b.f_inf = force.sup_bound(0);
  b.fprime_inf = force.sup_bound(1);
  const double a = s0.alpha, iM = b.iota_pi * b.mass;
  b.c0 = 0.5 * std::min(re.min, iM / (2.0 * std::numbers::pi * b.iota_pi + b.q0_inf));
  b.c1 = 2.0 * b.fprime_inf / iM;
  b.c2 = iM / (2.0 * b.c0);
  b.c3 = std::max({2.0 * re.max, 4.0 * b.mass * std::pow(2.0 * b.c2, 1.0 / a),
                   2.0 / b.c2 * b.mass * std::pow(b.r0, -1.0 - a)});
  b.c4 = (1.0 + a) / a * b.c1;
  return b;
}

struct BoundViolation {
  std::string bound;
  double t;
  double value;
  double limit;
};

/// Per-bound violation counts over every snapshot. `worst_ratio` is the largest
/// value/limit seen (lower bounds use limit/value).
struct BoundsReport {
  std::size_t snapshots = 0;
  std::size_t violations = 0;
  std::vector<BoundViolation> first_violations;
  std::map<std::string, double> worst_ratio;

  bool ok() const { return violations == 0; }

  void record(const std::string& name, double t, double value, double limit, bool upper, double slack) {
    const double ratio = upper ? value / limit : limit / value;
    auto& w = worst_ratio[name];
    w = std::max(w, ratio);
    if (ratio > 1.0 + slack) {
      ++violations;
      if (first_violations.size() < 16) first_violations.push_back({name, t, value, limit});
    }
  }
};

/// c0 exp(-c1 t) <= rho <= c3 exp(c4 t) at every snapshot.
inline BoundsReport check_density_bounds(const std::vector<DiagnosticsRecord>& recs, const BoundConstants& b,
                                         double slack = 1e-9) {
  BoundsReport rep;
  for (const auto& r : recs) {
    ++rep.snapshots;
    rep.record("rho_lower", r.t, r.rho_min, b.c0 * std::exp(-b.c1 * r.t), false, slack);
    rep.record("rho_upper", r.t, r.rho_max, b.c3 * std::exp(b.c4 * r.t), true, slack);
  }
  return rep;
}

/// ||q(t)|| <= ||q0|| + ||f'|| int_0^t rho_-^{-1} and |q| <= c2 exp(c1 t).
inline BoundsReport check_q_bound(const std::vector<DiagnosticsRecord>& recs, const BoundConstants& b,
                                  double slack = 1e-9) {
  BoundsReport rep;
  std::vector<double> t, inv;
  for (const auto& r : recs) {
    t.push_back(r.t);
    inv.push_back(1.0 / r.rho_min);
  }
  const auto iinv = cumulative_trapezoid(t, inv);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ++rep.snapshots;
    rep.record("q_transport", recs[i].t, recs[i].q_inf_norm, b.q0_inf + b.fprime_inf * iinv[i], true, slack);
    rep.record("q_exponential", recs[i].t, recs[i].q_inf_norm, b.c2 * std::exp(b.c1 * recs[i].t), true, slack);
  }
  return rep;
}

/// Every bound of the L^infinity proposition: u, rho (both sides), q (both forms), e.
inline BoundsReport check_linfty_bounds(const std::vector<DiagnosticsRecord>& recs, const BoundConstants& b,
                                        double slack = 1e-9) {
  BoundsReport rep = check_density_bounds(recs, b, slack);
  const BoundsReport q = check_q_bound(recs, b, slack);
  rep.violations += q.violations;
  rep.first_violations.insert(rep.first_violations.end(), q.first_violations.begin(), q.first_violations.end());
  for (const auto& [k, v] : q.worst_ratio) rep.worst_ratio[k] = v;
  for (const auto& r : recs) {
    rep.record("u_linear", r.t, r.u_inf_norm, b.u0_inf + r.t * b.f_inf, true, slack);
    rep.record("e_exponential", r.t, r.e_inf_norm, b.c2 * b.c3 * std::exp((b.c1 + b.c4) * r.t), true, slack);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Alignment

/// A(t) after `t_from`, least-squares rate of log A, and the worst ratio of
/// A(t) to A(t_from) exp(-rate_bound (t - t_from)).
struct AlignmentReport {
  std::vector<double> t;
  std::vector<double> amplitude;
  double t_from = 0.0;
  double rate_bound = 0.0;
  double fitted_rate = 0.0;
  double worst_ratio = 0.0;
  bool below_floor = false;
  std::size_t fit_points = 0;
};

inline AlignmentReport alignment_decay(const std::vector<DiagnosticsRecord>& recs, double rate_bound,
                                       double t_from = 0.0, double floor = 1e-14) {
  AlignmentReport rep;
  rep.t_from = t_from;
  rep.rate_bound = rate_bound;
  double a0 = -1.0;
  std::vector<double> ft, fy;
  for (const auto& r : recs) {
    if (r.t < t_from - 1e-12) continue;
    if (a0 < 0.0) a0 = r.alignment;
    rep.t.push_back(r.t);
    rep.amplitude.push_back(r.alignment);
    if (a0 > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, r.alignment / (a0 * std::exp(-rate_bound * (r.t - t_from))));
    if (r.alignment < floor) {
      rep.below_floor = true;
      continue;
    }
    ft.push_back(r.t);
    fy.push_back(std::log(r.alignment));
  }
  rep.fit_points = ft.size();
  if (ft.size() >= 2) rep.fitted_rate = -fit_line(ft, fy).slope;
  return rep;
}

// ---------------------------------------------------------------------------
// Hoelder smoothing

/// Fit of log [g(t)]_{C^gamma} against log t over snapshots with 0 < t <= t_fit.
/// `envelope_constant` is max_t [g(t)] t^{gamma/alpha} over the same window.
struct HolderReport {
  double gamma = 0.0;
  double predicted_slope = 0.0;
  double fitted_slope = 0.0;
  double envelope_constant = 0.0;
  double tolerance = 0.0;
  std::size_t points = 0;
  std::vector<double> t;
  std::vector<double> seminorm;

  bool ok() const { return fitted_slope >= predicted_slope - tolerance; }
};

enum class HolderTarget { rho, u };

inline HolderReport holder_scaling_study(const Trajectory& traj, double gamma, double t_fit,
                                         HolderTarget target = HolderTarget::rho, double tolerance = 0.05) {
  HolderReport rep;
  rep.gamma = gamma;
  rep.tolerance = tolerance;
  if (traj.snapshots.empty()) return rep;
  const double alpha = traj.snapshots.front().state.alpha;
  rep.predicted_slope = -gamma / alpha;
  std::vector<double> lx, ly;
  for (const auto& s : traj.snapshots) {
    if (s.state.t <= 0.0 || s.state.t > t_fit + 1e-12) continue;
    const double v = holder_seminorm(target == HolderTarget::rho ? s.state.rho : s.state.u, gamma);
    rep.t.push_back(s.state.t);
    rep.seminorm.push_back(v);
    rep.envelope_constant = std::max(rep.envelope_constant, v * std::pow(s.state.t, gamma / alpha));
    lx.push_back(std::log(s.state.t));
    ly.push_back(std::log(v));
  }
  rep.points = lx.size();
  if (lx.size() >= 2) rep.fitted_slope = fit_line(lx, ly).slope;
  return rep;
}

// ---------------------------------------------------------------------------
// Flocking

/// Moving-frame density rho~(x,t) = rho(x + ubar t, t) with ubar = P/M,
/// Cauchy distances ||rho~(t_{k+1}) - rho~(t_k)||_inf over dyadic times
/// t_k = t_start 2^k, and the exponential fit of ||u'(t)||_inf after t_start.
struct FlockingReport {
  double ubar = 0.0;
  double t_start = 0.0;
  std::vector<double> dyadic_times;
  std::vector<double> cauchy_distances;
  double u_prime_rate = 0.0;
  std::size_t fit_points = 0;
  double slack = 0.1;

  bool cauchy_decreasing() const {
    for (std::size_t i = 1; i < cauchy_distances.size(); ++i)
      if (cauchy_distances[i] > cauchy_distances[i - 1] * (1.0 + slack)) return false;
    return cauchy_distances.size() >= 2;
  }
};

inline Field moving_frame_density(const State& s, double ubar) { return shift(s.rho, ubar * s.t); }

inline FlockingReport flocking_study(const Trajectory& traj, double t_start, double slack = 0.1) {
  FlockingReport rep;
  rep.t_start = t_start;
  rep.slack = slack;
  if (traj.snapshots.empty() || !(t_start > 0.0)) return rep;
  const State& last = traj.snapshots.back().state;
  rep.ubar = integrate(dealiased_product(last.rho, last.u)) / integrate(last.rho);

  auto find = [&](double t) -> const Snapshot* {
    for (const auto& s : traj.snapshots)
      if (std::abs(s.state.t - t) <= 1e-9 * std::max(1.0, t)) return &s;
    return nullptr;
  };
  std::vector<const Snapshot*> dyadic;
  for (double t = t_start; t <= last.t * (1 + 1e-12); t *= 2.0) {
    if (const Snapshot* s = find(t)) {
      dyadic.push_back(s);
      rep.dyadic_times.push_back(s->state.t);
    }
  }
  for (std::size_t k = 1; k < dyadic.size(); ++k) {
    const Field a = moving_frame_density(dyadic[k - 1]->state, rep.ubar);
    const Field b = moving_frame_density(dyadic[k]->state, rep.ubar);
    rep.cauchy_distances.push_back(max_abs(b - a));
  }

  std::vector<double> ft, fy;
  for (const auto& s : traj.snapshots) {
    if (s.state.t < t_start - 1e-12) continue;
    const double v = sup_norm(derivative(s.state.u));
    if (v <= 0.0) continue;
    ft.push_back(s.state.t);
    fy.push_back(std::log(v));
  }
  rep.fit_points = ft.size();
  if (ft.size() >= 2) rep.u_prime_rate = fit_line(ft, fy).slope;
  return rep;
}

// ---------------------------------------------------------------------------
// CSV rows

inline std::vector<std::string> diagnostics_csv_header(const std::vector<double>& holder_gammas) {
  std::vector<std::string> h{"t",           "mass",         "momentum",       "energy",
                             "rho_energy",  "dissipation",  "rho_dissipation", "alignment",
                             "rho_min",     "rho_max",      "u_inf_norm",     "q_min",
                             "q_max",       "q_inf_norm",   "e_inf_norm",     "e_integral",
                             "u_prime_inf_norm", "rho_prime_inf_norm", "force_power", "force_momentum",
                             "e_rho_squared", "energy_residual", "rho_energy_residual"};
  for (double g : holder_gammas) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "rho_holder_%g", g);
    h.emplace_back(buf);
  }
  return h;
}

inline std::vector<double> diagnostics_csv_row(const DiagnosticsRecord& r) {
  std::vector<double> v{r.t,           r.mass,         r.momentum,        r.energy,        r.rho_energy,
                        r.dissipation, r.rho_dissipation, r.alignment,     r.rho_min,       r.rho_max,
                        r.u_inf_norm,  r.q_min,        r.q_max,           r.q_inf_norm,    r.e_inf_norm,
                        r.e_integral,  r.u_prime_inf_norm, r.rho_prime_inf_norm, r.force_power, r.force_momentum,
                        r.e_rho_squared, r.energy_residual, r.rho_energy_residual};
  v.insert(v.end(), r.rho_holder.begin(), r.rho_holder.end());
  return v;
}

}  // namespace falign
