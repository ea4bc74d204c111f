// falign: run scenarios and post-process their output.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 solver error, 3 config or input error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "falign/experiments.hpp"

namespace fs = std::filesystem;
using namespace falign;

namespace {

enum Exit : int { kPass = 0, kCheckFailed = 1, kSolverError = 2, kConfigError = 3 };

void print_result(const ScenarioResult& r, std::ostream& os) {
  os << "scenario " << r.name << " -> " << r.output_dir.string() << "\n";
  for (const auto& c : r.checks) {
    char line[256];
    std::snprintf(line, sizeof line, "  [%s] %-36s %.6g %s %.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.measured, c.relation.c_str(), c.tolerance);
    os << line;
  }
  for (const auto& [k, v] : r.metrics) os << "  metric " << k << " = " << format_double(v) << "\n";
  os << (r.passed() ? "  all checks passed\n" : "  checks failed\n");
}

struct RunOutcome {
  int code = kPass;
  std::string log;
};

RunOutcome run_one(const fs::path& cfg_path, const std::optional<fs::path>& out) {
  RunOutcome o;
  std::ostringstream os;
  fs::path dir;
  ScenarioConfig sc;
  try {
    sc = load_scenario(cfg_path);
  } catch (const ConfigError& e) {
    os << cfg_path.string() << ": config error: " << e.what() << "\n";
    o.code = kConfigError;
    o.log = os.str();
    return o;
  }
  dir = out.value_or(output_root() / sc.name);
  try {
    const ScenarioResult r = run_scenario(sc, dir);
    print_result(r, os);
    o.code = r.passed() ? kPass : kCheckFailed;
  } catch (const SolverError& e) {
    os << sc.name << ": solver error at t = " << e.time() << ": " << e.what() << "\n";
    ScenarioResult r;
    r.name = sc.name;
    r.error = e.what();
    fs::create_directories(dir);
    detail::write_atomic(dir / "summary.json", summary_json(r).dump(2) + "\n");
    o.code = kSolverError;
  } catch (const ConfigError& e) {
    os << sc.name << ": config error: " << e.what() << "\n";
    o.code = kConfigError;
  }
  o.log = os.str();
  return o;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Trajectory load_trajectory(const fs::path& dir, ForceSpec force) {
  Trajectory tr;
  tr.force = std::move(force);
  for (const fs::path& p : sorted_files(dir, ".bin")) {
    SnapshotFile f = load_snapshot(p);
    DerivedFields d = compute_derived(f.state);
    tr.snapshots.push_back({std::move(f.state), std::move(d), std::nullopt});
  }
  std::sort(tr.snapshots.begin(), tr.snapshots.end(),
            [](const Snapshot& a, const Snapshot& b) { return a.state.t < b.state.t; });
  return tr;
}

ForceSpec force_from(const fs::path& cfg) {
  if (cfg.empty() || !fs::exists(cfg)) return ForceSpec::zero();
  return load_scenario(cfg).sim.force;
}

int cmd_diagnose(const std::vector<std::string>& files, const std::string& cfg) {
  const ForceSpec force = force_from(cfg);
  std::vector<DiagnosticsRecord> recs;
  for (const auto& f : files) {
    const SnapshotFile s = load_snapshot(f);
    recs.push_back(compute_record(s.state, compute_derived(s.state), force));
  }
  std::cout << diagnostics_table(recs, {}).str();
  return kPass;
}

int cmd_budget(const fs::path& dir, double tol) {
  const fs::path snaps = fs::is_directory(dir / "snapshots") ? dir / "snapshots" : dir;
  const Trajectory tr = load_trajectory(snaps, force_from(dir / "config.cfg"));
  if (tr.snapshots.size() < 2) throw ConfigError("need at least two snapshots in " + snaps.string());
  const EnergyBudgetReport rep = energy_budget(tr);
  budget_table(rep).write(dir / "budget.csv");
  besov_table(tr, 1).write(dir / "besov.csv");
  double worst = 0.0;
  for (const auto& b : rep.series) {
    if (b.failed) {
      std::cout << "Q = " << b.Q << ": " << b.failure << "\n";
      worst = INFINITY;
      continue;
    }
    std::cout << "Q = " << b.Q << "  max relative residual " << format_double(b.max_relative_residual()) << "\n";
    worst = std::max(worst, b.max_relative_residual());
  }
  const OnsagerConvergence oc = onsager_convergence_study(rep);
  std::cout << "flux decrease factor " << format_double(oc.flux_factor) << ", eps decrease factor "
            << format_double(oc.eps_factor) << ", flux slope " << format_double(oc.flux_slope) << "\n";
  std::cout << "wrote " << (dir / "budget.csv").string() << " and " << (dir / "besov.csv").string() << "\n";
  return worst <= tol ? kPass : kCheckFailed;
}

int report_one(const fs::path& summary) {
  const auto j = nlohmann::json::parse(detail::read_file(summary));
  std::cout << j.value("name", std::string("?")) << ": " << (j.value("passed", false) ? "PASS" : "FAIL");
  if (const std::string err = j.value("error", std::string()); !err.empty()) std::cout << " (" << err << ")";
  std::cout << "\n";
  for (const auto& c : j["checks"]) {
    char line[256];
    std::snprintf(line, sizeof line, "  [%s] %-36s %.6g %s %.6g\n", c["pass"].get<bool>() ? "PASS" : "FAIL",
                  c["name"].get<std::string>().c_str(), c["measured"].get<double>(),
                  c["relation"].get<std::string>().c_str(), c["tolerance"].get<double>());
    std::cout << line;
  }
  if (!j.value("error", std::string()).empty()) return kSolverError;
  return j.value("passed", false) ? kPass : kCheckFailed;
}

int cmd_report(const fs::path& dir) {
  std::vector<fs::path> summaries;
  if (fs::exists(dir / "summary.json")) {
    summaries.push_back(dir / "summary.json");
  } else if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "summary.json")) summaries.push_back(e.path() / "summary.json");
    std::sort(summaries.begin(), summaries.end());
  }
  if (summaries.empty()) throw ConfigError("no summary.json under " + dir.string());
  int code = kPass;
  for (const auto& s : summaries) code = std::max(code, report_one(s));
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forced fractional Euler alignment simulator and diagnostics"};
  app.require_subcommand(1);

  std::string cfg, out, dir, cfg_for_force;
  std::vector<std::string> files;
  int jobs = 1;
  double budget_tol = 1e-5;

  auto* run = app.add_subcommand("run", "Run one scenario config");
  run->add_option("config", cfg, "Scenario .cfg file")->required();
  run->add_option("-o,--out", out, "Output directory (default: $FALIGN_OUTPUT_ROOT/<name>)");

  auto* sweep = app.add_subcommand("sweep", "Run every .cfg in a directory");
  sweep->add_option("dir", dir, "Directory of scenario configs")->required();
  sweep->add_option("-j,--jobs", jobs, "Scenarios to run concurrently")->check(CLI::PositiveNumber);

  auto* diagnose = app.add_subcommand("diagnose", "Print diagnostics CSV for snapshot files");
  diagnose->add_option("snapshots", files, "Snapshot files")->required();
  diagnose->add_option("-c,--config", cfg_for_force, "Scenario config supplying the force");

  auto* budget = app.add_subcommand("budget", "Energy budget from a saved trajectory directory");
  budget->add_option("dir", dir, "Scenario output directory or snapshot directory")->required();
  budget->add_option("--tol", budget_tol, "Relative residual tolerance");

  auto* report = app.add_subcommand("report", "Summarize scenario results");
  report->add_option("dir", dir, "Scenario output directory or a root of several")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const RunOutcome o = run_one(cfg, out.empty() ? std::nullopt : std::optional<fs::path>(out));
      std::cout << o.log;
      return o.code;
    }
    if (*sweep) {
      const auto cfgs = sorted_files(dir, ".cfg");
      std::vector<RunOutcome> outcomes(cfgs.size());
      for (std::size_t start = 0; start < cfgs.size(); start += static_cast<std::size_t>(jobs)) {
        std::vector<std::future<RunOutcome>> batch;
        const std::size_t end = std::min(cfgs.size(), start + static_cast<std::size_t>(jobs));
        for (std::size_t i = start; i < end; ++i)
          batch.push_back(std::async(std::launch::async, run_one, cfgs[i], std::nullopt));
        for (std::size_t i = start; i < end; ++i) outcomes[i] = batch[i - start].get();
      }
      int code = kPass;
      for (const auto& o : outcomes) {
        std::cout << o.log;
        code = std::max(code, o.code);
      }
      return code;
    }
    if (*diagnose) return cmd_diagnose(files, cfg_for_force);
    if (*budget) return cmd_budget(dir, budget_tol);
    if (*report) return cmd_report(dir);
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kPass;
}
