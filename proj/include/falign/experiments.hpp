#pragma once

// Scenario configuration, the scenario runner, and the mollification and
// uniqueness experiments.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "falign/diagnostics.hpp"
#include "falign/io.hpp"
#include "falign/model.hpp"
#include "falign/onsager.hpp"

namespace falign {

// ---------------------------------------------------------------------------
// Flat key = value configuration

/// Parsed `key = value` lines. '#' starts a comment. Keys are unique.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ConfigFile parse(const std::string& text) {
    ConfigFile cf;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      const std::string s = trim(raw);
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
      const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", line);
      if (cf.entries_.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
      cf.entries_[key] = {value, line};
    }
    return cf;
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
  }

  double get_double(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    return e ? to_double(e->value, *e, key) : fallback;
  }

  long get_int(const std::string& key, long fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    const double v = to_double(e->value, *e, key);
    if (v != std::floor(v)) throw ConfigError("'" + key + "' must be an integer", e->line);
    return static_cast<long>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError("'" + key + "' must be a boolean", e->line);
  }

  std::vector<double> get_list(const std::string& key, std::vector<double> fallback = {}) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const std::string& item : split(e->value)) out.push_back(to_double(item, *e, key));
    return out;
  }

  std::vector<std::string> get_words(const std::string& key) const {
    const Entry* e = find(key);
    return e ? split(e->value) : std::vector<std::string>{};
  }

  /// Keys starting with `prefix`, with the prefix removed.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
    return out;
  }

  /// Throws on the first key never looked up.
  void reject_unused() const {
    const Entry* first = nullptr;
    std::string name;
    for (const auto& [k, v] : entries_)
      if (!used_.count(k) && (!first || v.line < first->line)) {
        first = &v;
        name = k;
      }
    if (first) throw ConfigError("unknown key '" + name + "'", first->line);
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

 private:
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;

  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double to_double(const std::string& s, const Entry& e, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
      throw ConfigError("'" + key + "' expects a number, got '" + s + "'", e.line);
    return v;
  }
};

// ---------------------------------------------------------------------------
// Scenario description

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"conservation", "energy",    "dissipation_agreement", "bounds",
                                              "alignment",    "holder",    "flocking",              "budget",
                                              "onsager",      "mollification", "uniqueness"};
  return names;
}

inline std::map<std::string, double> default_tolerances() {
  return {{"mass", 1e-11},
          {"e_integral", 1e-9},
          {"momentum", 1e-11},
          {"energy", 1e-5},
          {"rho_energy", 1e-5},
          {"order", 1.8},
          {"dissipation_agreement", 1e-5},
          {"alignment", 1e-6},
          {"holder", 0.05},
          {"flocking_slack", 0.1},
          {"budget", 1e-5},
          {"onsager_factor", 10.0},
          {"uniqueness_zero", 1e-12},
          {"uniqueness_linear", 0.05},
          {"uniqueness_refine", 0.10}};
}

struct ScenarioConfig {
  std::string name = "scenario";
  SimConfig sim;
  std::vector<std::string> checks;
  std::map<std::string, double> tol = default_tolerances();

  std::vector<double> holder_gammas{0.1, 0.25};
  std::optional<double> holder_t_fit;
  std::optional<double> alignment_t_from;
  std::optional<double> flocking_t_start;
  std::size_t dissipation_every = 10;
  std::size_t besov_every = 10;
  std::vector<double> mollify_eps;
  std::vector<double> mollify_times{0.5};
  double uniqueness_delta = 1e-6;
  double uniqueness_delta2 = 1e-5;
  bool uniqueness_refine = true;
  bool save_snapshots = true;
  std::size_t snapshot_every = 1;
  std::string source_text;

  bool enabled(const std::string& check) const {
    return std::find(checks.begin(), checks.end(), check) != checks.end();
  }
};

inline ForceSpec parse_force(const ConfigFile& cf) {
  const std::string kind = cf.get_string("force", "zero");
  if (kind == "zero") return ForceSpec::zero();
  try {
    if (kind == "bump")
      return ForceSpec::bump(cf.get_double("force.amp", 1.0), static_cast<int>(cf.get_int("force.k", 1)),
                             cf.get_double("force.t_on", 0.0), cf.get_double("force.t_off", 1.0),
                             cf.get_double("force.phase", 0.0));
    if (kind == "trig") {
      std::vector<int> ks;
      for (double k : cf.get_list("force.ks", {1.0})) ks.push_back(static_cast<int>(k));
      return ForceSpec::trig(cf.get_list("force.amps", {1.0}), ks, cf.get_list("force.phases"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("force: ") + e.what(), cf.line_of("force"));
  }
  throw ConfigError("unknown force '" + kind + "'", cf.line_of("force"));
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  const ConfigFile cf = ConfigFile::parse(text);
  ScenarioConfig sc;
  sc.source_text = text;
  sc.name = cf.get_string("name", sc.name);
  SimConfig& c = sc.sim;
  const long n = cf.get_int("n", static_cast<long>(c.n_points));
  if (n <= 0) throw ConfigError("n must be positive", cf.line_of("n"));
  c.n_points = static_cast<std::size_t>(n);
  c.padding_factor = static_cast<std::size_t>(cf.get_int("padding", 2));
  c.alpha = cf.get_double("alpha", c.alpha);
  c.t_end = cf.get_double("t_end", c.t_end);
  c.cfl_number = cf.get_double("cfl", c.cfl_number);
  c.dt_max = cf.get_double("dt_max", c.dt_max);
  c.output_stride = cf.get_double("output_stride", c.output_stride);
  c.output_times = cf.get_list("output_times");
  c.evolve_e = cf.get_bool("evolve_e", false);

  c.initial.name = cf.get_string("initial", "smooth");
  c.initial.seed = static_cast<std::uint64_t>(cf.get_int("initial.seed", 0));
  c.initial.floor = cf.get_double("initial.floor", kVacuumThreshold);
  c.initial.mollify_eps = cf.get_double("initial.mollify", 0.0);
  for (const std::string& k : cf.keys_with_prefix("initial."))
    if (k != "seed" && k != "floor" && k != "mollify") c.initial.params[k] = cf.get_double("initial." + k, 0.0);
  c.force = parse_force(cf);

  for (const std::string& w : cf.get_words("checks")) {
    if (std::find(known_checks().begin(), known_checks().end(), w) == known_checks().end())
      throw ConfigError("unknown check '" + w + "'", cf.line_of("checks"));
    if (!sc.enabled(w)) sc.checks.push_back(w);
  }
  for (const std::string& k : cf.keys_with_prefix("tol.")) {
    if (!sc.tol.count(k)) throw ConfigError("unknown tolerance 'tol." + k + "'", cf.line_of("tol." + k));
    sc.tol[k] = cf.get_double("tol." + k, 0.0);
  }

  sc.holder_gammas = cf.get_list("holder.gammas", sc.holder_gammas);
  if (cf.has("holder.t_fit")) sc.holder_t_fit = cf.get_double("holder.t_fit", 0.0);
  if (cf.has("alignment.t_from")) sc.alignment_t_from = cf.get_double("alignment.t_from", 0.0);
  if (cf.has("flocking.t_start")) sc.flocking_t_start = cf.get_double("flocking.t_start", 0.0);
  sc.dissipation_every = static_cast<std::size_t>(std::max(1L, cf.get_int("dissipation.every", 10)));
  sc.besov_every = static_cast<std::size_t>(std::max(1L, cf.get_int("besov.every", 10)));
  sc.mollify_eps = cf.get_list("mollification.eps");
  sc.mollify_times = cf.get_list("mollification.times", sc.mollify_times);
  sc.uniqueness_delta = cf.get_double("uniqueness.delta", sc.uniqueness_delta);
  sc.uniqueness_delta2 = cf.get_double("uniqueness.delta2", sc.uniqueness_delta2);
  sc.uniqueness_refine = cf.get_bool("uniqueness.refine", sc.uniqueness_refine);
  sc.save_snapshots = cf.get_bool("snapshots.save", sc.save_snapshots);
  sc.snapshot_every = static_cast<std::size_t>(std::max(1L, cf.get_int("snapshots.every", 1)));
  cf.reject_unused();

  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_scenario(text);
}

// ---------------------------------------------------------------------------
// Mollification limit

struct MollificationReport {
  std::vector<double> eps;
  std::vector<double> times;
  /// distances[i][j] = ||g^{eps_j}(times[i]) - g^{eps_{j+1}}(times[i])||_inf
  std::vector<std::vector<double>> u_distances;
  std::vector<std::vector<double>> rho_distances;

  /// Distances decrease in j at every positive time.
  bool cauchy_decreasing() const {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] <= 0.0) continue;
      for (const auto* d : {&u_distances[i], &rho_distances[i]})
        for (std::size_t j = 1; j < d->size(); ++j)
          if ((*d)[j] > (*d)[j - 1]) return false;
    }
    return true;
  }

  /// Smallest ratio d_j / d_{j+1} over positive times.
  double min_halving_factor() const {
    double m = INFINITY;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] <= 0.0) continue;
      for (const auto* d : {&u_distances[i], &rho_distances[i]})
        for (std::size_t j = 1; j < d->size(); ++j)
          if ((*d)[j] > 0.0) m = std::min(m, (*d)[j - 1] / (*d)[j]);
    }
    return m;
  }
};

inline MollificationReport mollification_convergence(const SimConfig& base, const std::vector<double>& eps_list,
                                                     const std::vector<double>& times) {
  if (eps_list.size() < 3) throw ConfigError("mollification needs at least three eps values");
  const double h = kTwoPi / static_cast<double>(base.n_points);
  for (std::size_t j = 0; j < eps_list.size(); ++j) {
    if (!(eps_list[j] > 4.0 * h)) throw ConfigError("mollification eps must exceed four grid spacings");
    if (j > 0 && !(eps_list[j] < eps_list[j - 1])) throw ConfigError("mollification eps must strictly decrease");
  }
  MollificationReport rep;
  rep.eps = eps_list;
  rep.times = {0.0};
  for (double t : times)
    if (t > 0.0 && t <= base.t_end) rep.times.push_back(t);

  std::vector<std::vector<State>> states;  // [j][i]
  for (double eps : eps_list) {
    SimConfig c = base;
    c.initial.mollify_eps = eps;
    c.output_stride = 0.0;
    c.output_times = rep.times;
    c.t_end = rep.times.back();
    const Trajectory tr = evolve(c);
    std::vector<State> at;
    for (double t : rep.times)
      for (const auto& s : tr.snapshots)
        if (std::abs(s.state.t - t) <= 1e-12 * std::max(1.0, t)) {
          at.push_back(s.state);
          break;
        }
    states.push_back(std::move(at));
  }
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    std::vector<double> du, dr;
    for (std::size_t j = 0; j + 1 < eps_list.size(); ++j) {
      du.push_back(max_abs(states[j][i].u - states[j + 1][i].u));
      dr.push_back(max_abs(states[j][i].rho - states[j + 1][i].rho));
    }
    rep.u_distances.push_back(std::move(du));
    rep.rho_distances.push_back(std::move(dr));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Uniqueness / stability

/// Phi(t) = ||sqrt(rho_s) u_d||^2 + ||rho_d / sqrt(rho_s)||^2 + ||q_d||^2 with
/// s, d the sum and difference of two runs. `rate` is the smallest Lambda with
/// Phi(t) <= Phi(0) exp(Lambda t) on the snapshots; `fitted_rate` is the
/// least-squares slope of log Phi.
struct UniquenessReport {
  double delta = 0.0;
  std::vector<double> t;
  std::vector<double> phi;
  double rate = 0.0;
  double fitted_rate = 0.0;

  double max_phi() const {
    double m = 0.0;
    for (double p : phi) m = std::max(m, std::abs(p));
    return m;
  }
};

inline double stability_functional(const Snapshot& a, const Snapshot& b) {
  const Field rs = a.state.rho + b.state.rho;
  const Field ud = a.state.u - b.state.u;
  const Field rd = a.state.rho - b.state.rho;
  const Field qd = a.derived.q - b.derived.q;
  double acc = 0.0;
  for (std::size_t j = 0; j < rs.size(); ++j) acc += rs[j] * ud[j] * ud[j] + rd[j] * rd[j] / rs[j] + qd[j] * qd[j];
  return acc * rs.grid().spacing();
}

/// Compatible perturbation of the initial state: smooth shifts of u and rho,
/// with e recomputed from the perturbed fields.
inline State perturb_state(const State& s, double delta) {
  const TorusGrid& g = s.grid();
  State p = s;
  p.rho += delta * Field::from_function(g, [](double x) { return std::cos(2.0 * x + 0.3); });
  p.u += delta * Field::from_function(g, [](double x) { return std::sin(3.0 * x); });
  return p;
}

inline UniquenessReport uniqueness_gronwall(const SimConfig& c, double delta) {
  const State s0 = initial_state(c);
  const Trajectory base = evolve_from(c, s0);
  const Trajectory pert = evolve_from(c, perturb_state(s0, delta));
  UniquenessReport rep;
  rep.delta = delta;
  for (std::size_t i = 0; i < base.snapshots.size(); ++i) {
    rep.t.push_back(base.snapshots[i].state.t);
    rep.phi.push_back(stability_functional(base.snapshots[i], pert.snapshots[i]));
  }
  const double phi0 = rep.phi.front();
  if (phi0 > 0.0) {
    rep.rate = -INFINITY;
    std::vector<double> ft, fy;
    for (std::size_t i = 0; i < rep.t.size(); ++i) {
      if (rep.t[i] > 0.0) rep.rate = std::max(rep.rate, std::log(rep.phi[i] / phi0) / rep.t[i]);
      if (rep.phi[i] > 0.0) {
        ft.push_back(rep.t[i]);
        fy.push_back(std::log(rep.phi[i]));
      }
    }
    if (ft.size() >= 2) rep.fitted_rate = fit_line(ft, fy).slope;
  }
  return rep;
}

/// Largest relative gap between Phi(t)/Phi(0) of two runs.
inline double normalized_gap(const UniquenessReport& a, const UniquenessReport& b) {
  double m = 0.0;
  const std::size_t n = std::min(a.phi.size(), b.phi.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double ra = a.phi[i] / a.phi.front(), rb = b.phi[i] / b.phi.front();
    m = std::max(m, std::abs(ra - rb) / std::max(std::abs(rb), 1e-300));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Scenario runner

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string relation = "<=";
  bool pass = false;
};

struct ScenarioResult {
  std::string name;
  std::string config_text;
  std::filesystem::path output_dir;
  std::filesystem::path diagnostics_csv;
  std::filesystem::path budget_csv;
  std::filesystem::path besov_csv;
  std::filesystem::path snapshot_dir;
  std::size_t snapshot_count = 0;
  std::size_t steps = 0;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, double>> metrics;
  std::string error;

  bool passed() const {
    if (!error.empty()) return false;
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }

  void check_le(const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, "<=", measured <= tol});
  }
  void check_lt(const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, "<", measured < tol});
  }
  void check_ge(const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, ">=", measured >= tol});
  }
  void metric(const std::string& name, double v) { metrics.emplace_back(name, v); }
};

/// Root for scenario output: $FALIGN_OUTPUT_ROOT or ./falign_out.
inline std::filesystem::path output_root() {
  if (const char* env = std::getenv("FALIGN_OUTPUT_ROOT"); env && *env) return env;
  return "falign_out";
}

inline nlohmann::json summary_json(const ScenarioResult& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["passed"] = r.passed();
  j["error"] = r.error;
  j["steps"] = r.steps;
  j["snapshot_count"] = r.snapshot_count;
  j["diagnostics_csv"] = r.diagnostics_csv.string();
  j["budget_csv"] = r.budget_csv.string();
  j["besov_csv"] = r.besov_csv.string();
  j["snapshot_dir"] = r.snapshot_dir.string();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks)
    j["checks"].push_back({{"name", c.name},
                           {"measured", c.measured},
                           {"tolerance", c.tolerance},
                           {"relation", c.relation},
                           {"pass", c.pass}});
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
  return j;
}

namespace detail {

inline Trajectory every_other(const Trajectory& tr) {
  Trajectory out;
  out.force = tr.force;
  for (std::size_t i = 0; i < tr.snapshots.size(); i += 2) out.snapshots.push_back(tr.snapshots[i]);
  if ((tr.snapshots.size() - 1) % 2 != 0) out.snapshots.push_back(tr.snapshots.back());
  return out;
}

inline std::vector<DiagnosticsRecord> every_other(const std::vector<DiagnosticsRecord>& recs) {
  std::vector<DiagnosticsRecord> out;
  for (std::size_t i = 0; i < recs.size(); i += 2) out.push_back(recs[i]);
  if ((recs.size() - 1) % 2 != 0) out.push_back(recs.back());
  return out;
}

inline double max_budget_residual(const EnergyBudgetReport& rep) {
  double m = 0.0;
  for (const auto& b : rep.series) m = std::max(m, b.failed ? INFINITY : b.max_relative_residual());
  return m;
}

inline double observed_order(double coarse, double fine) {
  if (fine <= 0.0) return INFINITY;
  return std::log2(coarse / fine);
}

}  // namespace detail

inline CsvTable budget_table(const EnergyBudgetReport& rep) {
  CsvTable t({"t", "Q", "E_leQ", "flux_int", "eps_Q", "force_term", "residual"});
  for (const auto& b : rep.series) {
    if (b.failed) continue;
    for (std::size_t i = 0; i < rep.t.size(); ++i)
      t.add_row({rep.t[i], double(b.Q), b.energy[i], b.flux_int[i], b.eps[i], b.force_term[i], b.residual[i]});
  }
  return t;
}

inline CsvTable besov_table(const Trajectory& tr, std::size_t every) {
  CsvTable t({"t", "q", "d_third_3_u", "dtilde_u", "dtilde_rho", "dtilde_rho_u"});
  for (std::size_t i = 0; i < tr.snapshots.size(); i += every)
    for (const BesovRow& r : besov_diagnostics(tr.snapshots[i].state))
      t.add_row({r.t, double(r.q), r.d_u, r.dtilde_u, r.dtilde_rho, r.dtilde_rho_u});
  return t;
}

inline CsvTable diagnostics_table(const std::vector<DiagnosticsRecord>& recs, const std::vector<double>& gammas) {
  CsvTable t(diagnostics_csv_header(gammas));
  for (const auto& r : recs) t.add_row(diagnostics_csv_row(r));
  return t;
}

/// Runs the base simulation and every enabled check. Solver errors propagate;
/// files are only written once the corresponding stage has finished.
inline ScenarioResult run_scenario(const ScenarioConfig& sc, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  ScenarioResult res;
  res.name = sc.name;
  res.config_text = sc.source_text;
  res.output_dir = out_dir;
  fs::create_directories(out_dir);
  detail::write_atomic(out_dir / "config.cfg", sc.source_text);

  const auto& tol = sc.tol;
  const Trajectory tr = evolve(sc.sim);
  res.steps = tr.steps;
  const State& s0 = tr.snapshots.front().state;

  const bool holder = sc.enabled("holder");
  const std::vector<double> gammas = holder ? sc.holder_gammas : std::vector<double>{};
  const auto recs = compute_records(tr, gammas);
  res.diagnostics_csv = out_dir / "diagnostics.csv";
  diagnostics_table(recs, gammas).write(res.diagnostics_csv);

  if (sc.save_snapshots) {
    res.snapshot_dir = out_dir / "snapshots";
    fs::create_directories(res.snapshot_dir);
    for (std::size_t i = 0; i < tr.snapshots.size(); i += sc.snapshot_every) {
      char name[32];
      std::snprintf(name, sizeof name, "snap_%06zu.bin", i);
      const Snapshot& s = tr.snapshots[i];
      save_snapshot(res.snapshot_dir / name, s.state, s.derived.e);
      ++res.snapshot_count;
    }
  }

  if (sc.enabled("conservation")) {
    const ConservationReport cr = conservation_report(recs);
    res.check_le("mass_drift", cr.mass_drift, tol.at("mass"));
    res.check_le("e_integral_drift", cr.e_integral_drift, tol.at("e_integral"));
    res.check_le("momentum_drift", cr.momentum_drift, tol.at("momentum"));
  }

  if (sc.enabled("energy")) {
    const EnergyResidual er = energy_residual(recs);
    res.check_le("energy_residual", er.max_relative(), tol.at("energy"));
    res.check_le("rho_energy_residual", er.max_rho_relative(), tol.at("rho_energy"));
    res.metric("energy_residual_unit_coefficient", er.max_alternative_relative());
    const EnergyResidual coarse = energy_residual(detail::every_other(recs));
    const double floor = 1e-13;
    if (er.max_relative() > floor)
      res.check_ge("energy_residual_order", detail::observed_order(coarse.max_relative(), er.max_relative()),
                   tol.at("order"));
    if (er.max_rho_relative() > floor)
      res.check_ge("rho_energy_residual_order",
                   detail::observed_order(coarse.max_rho_relative(), er.max_rho_relative()), tol.at("order"));
  }

  if (sc.enabled("dissipation_agreement")) {
    const KernelSpec spec{sc.sim.alpha};
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.snapshots.size(); i += sc.dissipation_every) {
      const State& s = tr.snapshots[i].state;
      const double a = dissipation_spectral(s), b = dissipation_double_integral(s, spec);
      const double ra = rho_dissipation_spectral(s), rb = rho_dissipation_double_integral(s, spec);
      const double scale = std::max(std::abs(a), 1e-300), rscale = std::max(std::abs(ra), 1e-300);
      if (std::abs(a) > 1e-12) worst = std::max(worst, std::abs(a - b) / scale);
      if (std::abs(ra) > 1e-12) worst = std::max(worst, std::abs(ra - rb) / rscale);
    }
    res.check_le("dissipation_agreement", worst, tol.at("dissipation_agreement"));
  }

  if (sc.enabled("bounds")) {
    const BoundConstants b = compute_bound_constants(s0, tr.force);
    const BoundsReport br = check_linfty_bounds(recs, b);
    res.check_le("bound_violations", double(br.violations), 0.0);
    for (const auto& [k, v] : br.worst_ratio) res.metric("bound_ratio_" + k, v);
    res.metric("c0", b.c0);
    res.metric("c1", b.c1);
    res.metric("c2", b.c2);
    res.metric("c3", b.c3);
    res.metric("c4", b.c4);
    res.metric("iota_pi", b.iota_pi);
    res.metric("r0", b.r0);
  }

  if (sc.enabled("alignment")) {
    double t_from = 0.0;
    if (sc.alignment_t_from) {
      t_from = *sc.alignment_t_from;
    } else if (const auto end = tr.force.support_end()) {
      t_from = *end;
    } else {
      throw ConfigError("alignment check needs a force that vanishes after a finite time");
    }
    const double rate = iota(std::numbers::pi, KernelSpec{sc.sim.alpha}) * mass(s0);
    const AlignmentReport a = alignment_decay(recs, rate, t_from);
    res.check_le("alignment_envelope_ratio", a.worst_ratio, 1.0 + tol.at("alignment"));
    res.check_ge("alignment_fitted_rate", a.fitted_rate, rate);
    res.metric("alignment_rate_bound", rate);
  }

  if (holder) {
    const double t_fit = sc.holder_t_fit.value_or(sc.sim.t_end);
    for (double g : sc.holder_gammas) {
      const HolderReport h = holder_scaling_study(tr, g, t_fit, HolderTarget::rho, tol.at("holder"));
      char name[64];
      std::snprintf(name, sizeof name, "holder_slope_gamma_%g", g);
      res.check_ge(name, h.fitted_slope, h.predicted_slope - h.tolerance);
      std::snprintf(name, sizeof name, "holder_envelope_gamma_%g", g);
      res.metric(name, h.envelope_constant);
    }
  }

  if (sc.enabled("flocking")) {
    const double t_start = sc.flocking_t_start.value_or(tr.force.support_end().value_or(1.0));
    const FlockingReport f = flocking_study(tr, t_start, tol.at("flocking_slack"));
    res.check_lt("u_prime_rate", f.u_prime_rate, 0.0);
    res.check_ge("cauchy_decreasing", f.cauchy_decreasing() ? 1.0 : 0.0, 1.0);
    res.metric("ubar", f.ubar);
    for (std::size_t i = 0; i < f.cauchy_distances.size(); ++i)
      res.metric("cauchy_distance_" + std::to_string(i), f.cauchy_distances[i]);
  }

  if (sc.enabled("budget") || sc.enabled("onsager")) {
    const EnergyBudgetReport rep = energy_budget(tr);
    res.budget_csv = out_dir / "budget.csv";
    budget_table(rep).write(res.budget_csv);
    res.besov_csv = out_dir / "besov.csv";
    besov_table(tr, sc.besov_every).write(res.besov_csv);
    if (sc.enabled("budget")) {
      const double fine = detail::max_budget_residual(rep);
      res.check_le("budget_residual", fine, tol.at("budget"));
      if (fine > 1e-13) {
        const double coarse = detail::max_budget_residual(energy_budget(detail::every_other(tr), rep.q_list));
        res.check_ge("budget_residual_order", detail::observed_order(coarse, fine), tol.at("order"));
      }
    }
    if (sc.enabled("onsager")) {
      const OnsagerConvergence oc = onsager_convergence_study(rep, tol.at("onsager_factor"));
      res.check_ge("flux_decrease_factor", oc.flux_factor, oc.required_factor);
      res.check_ge("eps_decrease_factor", oc.eps_factor, oc.required_factor);
      res.metric("flux_slope", oc.flux_slope);
      for (std::size_t i = 0; i < oc.q_list.size(); ++i) {
        res.metric("flux_max_Q" + std::to_string(oc.q_list[i]), oc.flux_max[i]);
        res.metric("eps_gap_max_Q" + std::to_string(oc.q_list[i]), oc.eps_gap_max[i]);
      }
    }
  }

  if (sc.enabled("mollification")) {
    const MollificationReport m = mollification_convergence(sc.sim, sc.mollify_eps, sc.mollify_times);
    res.check_ge("mollification_cauchy_decreasing", m.cauchy_decreasing() ? 1.0 : 0.0, 1.0);
    res.metric("mollification_min_halving_factor", m.min_halving_factor());
    for (std::size_t i = 0; i < m.times.size(); ++i)
      for (std::size_t j = 0; j < m.u_distances[i].size(); ++j) {
        const std::string tag = "_t" + format_double(m.times[i]) + "_j" + std::to_string(j);
        res.metric("mollification_u" + tag, m.u_distances[i][j]);
        res.metric("mollification_rho" + tag, m.rho_distances[i][j]);
      }
  }

  if (sc.enabled("uniqueness")) {
    const UniquenessReport zero = uniqueness_gronwall(sc.sim, 0.0);
    res.check_le("uniqueness_identical_phi", zero.max_phi(), tol.at("uniqueness_zero"));
    const UniquenessReport a = uniqueness_gronwall(sc.sim, sc.uniqueness_delta);
    const UniquenessReport b = uniqueness_gronwall(sc.sim, sc.uniqueness_delta2);
    res.check_le("uniqueness_linear_response", normalized_gap(a, b), tol.at("uniqueness_linear"));
    res.metric("uniqueness_rate", a.rate);
    res.metric("uniqueness_fitted_rate", a.fitted_rate);
    if (sc.uniqueness_refine) {
      SimConfig fine = sc.sim;
      fine.n_points *= 2;
      const UniquenessReport r = uniqueness_gronwall(fine, sc.uniqueness_delta);
      const double gap = std::abs(r.rate - a.rate) / std::max(std::abs(r.rate), std::abs(a.rate));
      res.check_le("uniqueness_rate_refinement", gap, tol.at("uniqueness_refine"));
      res.metric("uniqueness_rate_refined", r.rate);
    }
  }

  detail::write_atomic(out_dir / "summary.json", summary_json(res).dump(2) + "\n");
  return res;
}

}  // namespace falign
