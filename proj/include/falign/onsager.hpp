#pragma once

// Littlewood-Paley energy budget: scale-limited energy E_{<=Q}, flux Pi_Q
// through the commutator F_Q, localized dissipation eps_Q and the force
// term, plus the Besov diagnostics that go with them.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "falign/diagnostics.hpp"
#include "falign/model.hpp"
#include "falign/torus_spectral.hpp"

namespace falign {

/// The low-passed density rho_{<=Q} is not positive at some node.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, int Q) : Error(what + " (Q = " + std::to_string(Q) + ")"), Q_(Q) {}
  int Q() const noexcept { return Q_; }

 private:
  int Q_;
};

namespace detail {

inline Field checked_ratio(const Field& num, const Field& den, int Q) {
  for (double v : den.samples())
    if (!(v > 0.0)) throw BudgetError("low-pass density is not positive", Q);
  return pointwise(num, den, [](double a, double b) { return a / b; });
}

inline Field times(const Field& a, const Field& b) {
  return pointwise(a, b, [](double x, double y) { return x * y; });
}

}  // namespace detail

/// Low-passed quantities shared by the budget terms at one (state, Q).
struct ScaleFields {
  int Q;
  Field rho_u;      // rho u (dealiased)
  Field m_low;      // (rho u)_{<=Q}
  Field rho_low;    // rho_{<=Q}
  Field U;          // (rho u)_{<=Q} / rho_{<=Q}
};

inline ScaleFields scale_fields(const State& s, int Q) {
  Field ru = dealiased_product(s.rho, s.u);
  Field m = lp_low(ru, Q);
  Field r = lp_low(s.rho, Q);
  Field U = detail::checked_ratio(m, r, Q);
  return {Q, std::move(ru), std::move(m), std::move(r), std::move(U)};
}

/// U = (rho u)_{<=Q} / rho_{<=Q}.
inline Field u_ratio(const State& s, int Q) { return scale_fields(s, Q).U; }

/// E_{<=Q} = (1/2) int (rho u)_{<=Q}^2 / rho_{<=Q}.
inline double scale_energy(const State& s, int Q) {
  const ScaleFields sf = scale_fields(s, Q);
  return 0.5 * inner_product(sf.m_low, sf.U);
}

/// F_Q = (rho u^2)_{<=Q} - U (rho u)_{<=Q}.
inline Field commutator(const State& s, const ScaleFields& sf) {
  return lp_low(dealiased_product(s.rho, s.u, s.u), sf.Q) - detail::times(sf.U, sf.m_low);
}

/// Pi_Q = int F_Q U'.
inline double flux(const State& s, int Q) {
  const ScaleFields sf = scale_fields(s, Q);
  return inner_product(commutator(s, sf), derivative(sf.U));
}

/// <rho T(rho, u), phi> = int [-L(rho u) L(rho phi) + L(rho) L(rho u phi)]
/// with L = Lambda_{alpha/2}.
inline double alignment_pairing(const Field& rho, const Field& u, const Field& phi, double alpha) {
  const Field ru = dealiased_product(rho, u);
  return -inner_product(frac_laplacian_half(ru, alpha), frac_laplacian_half(dealiased_product(rho, phi), alpha)) +
         inner_product(frac_laplacian_half(rho, alpha), frac_laplacian_half(dealiased_product(rho, u, phi), alpha));
}

/// Integrand of eps_Q: -int (rho T(rho,u))_{<=Q} U = -<rho T(rho,u), U_{<=Q}>.
inline double eps_rate(const State& s, const ScaleFields& sf) {
  return -alignment_pairing(s.rho, s.u, lp_low(sf.U, sf.Q), s.alpha);
}

inline double eps_rate(const State& s, int Q) { return eps_rate(s, scale_fields(s, Q)); }

/// Alternative ordering: -int rho_{<=Q} u_{<=Q} T(rho_{<=Q}, u_{<=Q}).
inline double eps_rate_alternative(const State& s, int Q) {
  const Field r = lp_low(s.rho, Q), u = lp_low(s.u, Q);
  return -alignment_pairing(r, u, u, s.alpha);
}

/// int (rho f)_{<=Q} U.
inline double force_rate(const State& s, const ScaleFields& sf, const ForceSpec& force) {
  if (force.is_zero()) return 0.0;
  return inner_product(lp_low(dealiased_product(s.rho, force.field(s.grid(), s.t)), sf.Q), sf.U);
}

/// Terms of the decomposition
///   F_Q = r_Q - [(rho u)_{<=Q} - rho_{<=Q} u_{<=Q}]^2 / rho_{<=Q} + rho_{>Q} u_{>Q}^2
///         + 2 [(rho u)_{<=Q} - rho_{<=Q} u_{<=Q}] u_{>Q} + rho [(u^2)_{<=Q} - u_{<=Q}^2],
/// with r_Q obtained as the difference. Norms are L^{3/2}.
struct CommutatorSplit {
  double f_norm;
  double terms_norm;
  double remainder_norm;
};

inline CommutatorSplit commutator_split(const State& s, int Q) {
  const ScaleFields sf = scale_fields(s, Q);
  const Field F = commutator(s, sf);
  const Field u_lo = lp_low(s.u, Q), u_hi = lp_high(s.u, Q), r_hi = lp_high(s.rho, Q);
  const Field c = sf.m_low - detail::times(sf.rho_low, u_lo);
  const Field t1 = -detail::checked_ratio(detail::times(c, c), sf.rho_low, Q);
  const Field t2 = detail::times(r_hi, detail::times(u_hi, u_hi));
  const Field t3 = 2.0 * detail::times(c, u_hi);
  const Field t4 = detail::times(s.rho, lp_low(dealiased_product(s.u, s.u), Q) - detail::times(u_lo, u_lo));
  const Field rem = F - t1 - t2 - t3 - t4;
  const double p = 1.5;
  return {lp_norm(F, p), lp_norm(t1, p) + lp_norm(t2, p) + lp_norm(t3, p) + lp_norm(t4, p), lp_norm(rem, p)};
}

// ---------------------------------------------------------------------------
// Budget over a trajectory

/// Default sweep Q = 0 .. log2(n/4).
inline std::vector<int> default_q_list(const TorusGrid& g) {
  std::vector<int> out;
  for (int Q = 0; Q <= g.max_block() - 1; ++Q) out.push_back(Q);
  return out;
}

struct BudgetSeries {
  int Q = 0;
  std::vector<double> energy;       // E_{<=Q}(t)
  std::vector<double> flux_int;     // int_0^t Pi_Q
  std::vector<double> eps;          // eps_Q(t)
  std::vector<double> eps_alternative;
  std::vector<double> force_term;   // int_0^t int (rho f)_{<=Q} U
  std::vector<double> residual;     // absolute
  std::vector<double> relative_residual;  // residual / E(0)
  bool failed = false;
  std::string failure;

  double max_relative_residual() const {
    double m = 0.0;
    for (double r : relative_residual) m = std::max(m, std::abs(r));
    return m;
  }
};

struct EnergyBudgetReport {
  std::vector<double> t;
  std::vector<int> q_list;
  std::vector<BudgetSeries> series;
  std::vector<double> energy;      // E(t)
  std::vector<double> dissipation; // eps(t) = (1/2) int_0^t D
};

inline EnergyBudgetReport energy_budget(const Trajectory& traj, std::vector<int> q_list = {}) {
  EnergyBudgetReport rep;
  if (traj.snapshots.empty()) return rep;
  if (q_list.empty()) q_list = default_q_list(traj.snapshots.front().state.grid());
  rep.q_list = q_list;
  std::vector<double> D;
  for (const auto& s : traj.snapshots) {
    rep.t.push_back(s.state.t);
    rep.energy.push_back(0.5 * inner_product(dealiased_product(s.state.rho, s.state.u), s.state.u));
    D.push_back(dissipation_spectral(s.state));
  }
  rep.dissipation = cumulative_trapezoid(rep.t, D);
  for (double& v : rep.dissipation) v *= 0.5;
  const double E0 = rep.energy.front();

  for (int Q : q_list) {
    BudgetSeries b;
    b.Q = Q;
    std::vector<double> pi, er, er_alt, fr;
    try {
      for (const auto& snap : traj.snapshots) {
        const State& s = snap.state;
        const ScaleFields sf = scale_fields(s, Q);
        b.energy.push_back(0.5 * inner_product(sf.m_low, sf.U));
        pi.push_back(inner_product(commutator(s, sf), derivative(sf.U)));
        er.push_back(eps_rate(s, sf));
        er_alt.push_back(eps_rate_alternative(s, Q));
        fr.push_back(force_rate(s, sf, traj.force));
      }
    } catch (const BudgetError& e) {
      b.failed = true;
      b.failure = e.what();
      rep.series.push_back(std::move(b));
      continue;
    }
    b.flux_int = cumulative_trapezoid(rep.t, pi);
    b.eps = cumulative_trapezoid(rep.t, er);
    b.eps_alternative = cumulative_trapezoid(rep.t, er_alt);
    b.force_term = cumulative_trapezoid(rep.t, fr);
    for (std::size_t i = 0; i < rep.t.size(); ++i) {
      const double res = (b.energy[i] - b.energy[0]) - (b.flux_int[i] - b.eps[i] + b.force_term[i]);
      b.residual.push_back(res);
      b.relative_residual.push_back(E0 > 0.0 ? res / E0 : res);
    }
    rep.series.push_back(std::move(b));
  }
  return rep;
}

/// Per-Q maxima over time of |int Pi_Q| and |eps_Q - eps|, and whether each
/// falls by at least `required_factor` from the first Q to the last.
struct OnsagerConvergence {
  std::vector<int> q_list;
  std::vector<double> flux_max;
  std::vector<double> eps_gap_max;
  double flux_factor = 0.0;
  double eps_factor = 0.0;
  double flux_slope = 0.0;  // slope of log2 |int Pi_Q| in Q
  double required_factor = 10.0;
  bool flux_ok = false;
  bool eps_ok = false;
};

inline OnsagerConvergence onsager_convergence_study(const EnergyBudgetReport& rep, double required_factor = 10.0,
                                                    double zero_floor = 1e-13) {
  OnsagerConvergence c;
  c.required_factor = required_factor;
  double scale = 0.0;
  for (double e : rep.energy) scale = std::max(scale, std::abs(e));
  for (const auto& b : rep.series) {
    if (b.failed) continue;
    double fm = 0.0, em = 0.0;
    for (std::size_t i = 0; i < rep.t.size(); ++i) {
      fm = std::max(fm, std::abs(b.flux_int[i]));
      em = std::max(em, std::abs(b.eps[i] - rep.dissipation[i]));
    }
    c.q_list.push_back(b.Q);
    c.flux_max.push_back(fm);
    c.eps_gap_max.push_back(em);
  }
  if (c.q_list.size() < 2) return c;
  const double floor = zero_floor * std::max(scale, 1.0);
  auto factor_ok = [&](const std::vector<double>& v, double& factor) {
    const double first = v.front(), last = v.back();
    if (first <= floor) {
      factor = 1.0;
      return last <= floor;
    }
    factor = last > 0.0 ? first / last : INFINITY;
    return factor >= required_factor;
  };
  c.flux_ok = factor_ok(c.flux_max, c.flux_factor);
  c.eps_ok = factor_ok(c.eps_gap_max, c.eps_factor);
  std::vector<double> qx, ly;
  for (std::size_t i = 0; i < c.q_list.size(); ++i)
    if (c.flux_max[i] > floor) {
      qx.push_back(c.q_list[i]);
      ly.push_back(std::log2(c.flux_max[i]));
    }
  if (qx.size() >= 2) c.flux_slope = fit_line(qx, ly).slope;
  return c;
}

// ---------------------------------------------------------------------------
// Besov diagnostics

/// d^s_{a,q}(g) = lambda_q^s ||g_q||_{L^a} for q = -1..max_block.
inline std::vector<double> besov_blocks(const Field& g, double s, double a) {
  std::vector<double> out;
  for (int q = -1; q <= g.grid().max_block(); ++q) out.push_back(std::pow(LPBlockSpec(q).lambda(), s) * lp_norm(lp_project(g, q), a));
  return out;
}

/// D^s_{a,Q} = sum_q K^s_{Q-q} d^s_{a,q} with K^s_j = lambda_j^{s-1} (j >= 0), lambda_j^s (j < 0).
inline double besov_localized(const std::vector<double>& d, int Q, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int j = Q - (static_cast<int>(i) - 1);
    const double lam = std::ldexp(1.0, j);
    acc += (j >= 0 ? std::pow(lam, s - 1.0) : std::pow(lam, s)) * d[i];
  }
  return acc;
}

/// d~_q = lambda_q^{alpha/2} ||g_q||_{L^2}.
inline std::vector<double> dissipative_blocks(const Field& g, double alpha) { return besov_blocks(g, 0.5 * alpha, 2.0); }

/// D~_Q = sum_q K~_{Q-q} d~_q with K~_j = lambda_j^{-alpha/2} (j >= 0), lambda_j^{alpha/2} (j < 0).
inline double dissipative_localized(const std::vector<double>& d, int Q, double alpha) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int j = Q - (static_cast<int>(i) - 1);
    const double lam = std::ldexp(1.0, j);
    acc += (j >= 0 ? std::pow(lam, -0.5 * alpha) : std::pow(lam, 0.5 * alpha)) * d[i];
  }
  return acc;
}

struct BesovRow {
  double t;
  int q;
  double d_u;         // d^{1/3}_{3,q}(u)
  double dtilde_u;
  double dtilde_rho;
  double dtilde_rho_u;
};

inline std::vector<BesovRow> besov_diagnostics(const State& s) {
  const auto du = besov_blocks(s.u, 1.0 / 3.0, 3.0);
  const auto tu = dissipative_blocks(s.u, s.alpha);
  const auto tr = dissipative_blocks(s.rho, s.alpha);
  const auto tm = dissipative_blocks(dealiased_product(s.rho, s.u), s.alpha);
  std::vector<BesovRow> out;
  for (std::size_t i = 0; i < du.size(); ++i)
    out.push_back({s.t, static_cast<int>(i) - 1, du[i], tu[i], tr[i], tm[i]});
  return out;
}

}  // namespace falign
