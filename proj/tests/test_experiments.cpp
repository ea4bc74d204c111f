#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "falign/experiments.hpp"

using namespace falign;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("falign_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

State random_state(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const TorusGrid g(n);
  std::vector<double> u(n), r(n);
  for (std::size_t j = 0; j < n; ++j) {
    u[j] = ud(rng);
    r[j] = 1.5 + ud(rng);
  }
  return State{Field(g, u), Field(g, r), 0.37, 0.73};
}

const char* kSmallScenario = R"(# small run
name = small
n = 32
alpha = 0.9
t_end = 0.2
output_stride = 0.02
initial = random_smooth
initial.seed = 11
initial.rho_amp = 0.3
checks = conservation, energy
tol.energy = 1e-3
tol.rho_energy = 1e-3
tol.momentum = 1e-6
)";

}  // namespace

TEST(Config, ParsesScenario) {
  const ScenarioConfig sc = parse_scenario(
      "name = demo\nn = 128\nalpha = 0.5\nt_end = 2\noutput_times = 0.5, 1.5\n"
      "initial = steep_tanh\ninitial.width = 0.05\ninitial.seed = 3\n"
      "force = bump\nforce.amp = 0.3\nforce.t_off = 1.5\n"
      "checks = energy, flocking\ntol.energy = 1e-4\nholder.gammas = 0.2\n");
  EXPECT_EQ(sc.name, "demo");
  EXPECT_EQ(sc.sim.n_points, 128u);
  EXPECT_DOUBLE_EQ(sc.sim.alpha, 0.5);
  EXPECT_EQ(sc.sim.output_times, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(sc.sim.initial.name, "steep_tanh");
  EXPECT_DOUBLE_EQ(sc.sim.initial.params.at("width"), 0.05);
  EXPECT_EQ(sc.sim.initial.seed, 3u);
  EXPECT_EQ(sc.sim.force.kind, ForceKind::bump);
  EXPECT_DOUBLE_EQ(*sc.sim.force.support_end(), 1.5);
  EXPECT_TRUE(sc.enabled("energy"));
  EXPECT_TRUE(sc.enabled("flocking"));
  EXPECT_FALSE(sc.enabled("bounds"));
  EXPECT_DOUBLE_EQ(sc.tol.at("energy"), 1e-4);
  EXPECT_EQ(sc.holder_gammas, std::vector<double>{0.2});
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("n = 64\nalpha 1\n"), 2);
  EXPECT_EQ(line_of("n = 64\n\nalpha = one\n"), 3);
  EXPECT_EQ(line_of("n = 64\nn = 32\n"), 2);
  EXPECT_EQ(line_of("n = 64\nbogus = 1\n"), 2);
  EXPECT_EQ(line_of("checks = energy, nope\n"), 1);
  EXPECT_EQ(line_of("# c\ntol.unknown = 1\n"), 2);
  EXPECT_EQ(line_of("force = sideways\n"), 1);
  EXPECT_EQ(line_of("n = 12.5\n"), 1);
  EXPECT_THROW(parse_scenario("n = 100\n"), ConfigError);
  EXPECT_THROW(parse_scenario("alpha = 2.5\n"), ConfigError);
}

TEST(Snapshot, RoundTripIsBitExact) {
  const State s = random_state(64, 9);
  const Field e = compute_derived(s).e;
  const fs::path dir = scratch_dir("snap");
  save_snapshot(dir / "a.bin", s, e);
  const SnapshotFile f = load_snapshot(dir / "a.bin");
  EXPECT_EQ(f.state.t, s.t);
  EXPECT_EQ(f.state.alpha, s.alpha);
  EXPECT_EQ(f.mass, mass(s));
  for (std::size_t j = 0; j < 64; ++j) {
    EXPECT_EQ(f.state.u[j], s.u[j]);
    EXPECT_EQ(f.state.rho[j], s.rho[j]);
    EXPECT_EQ(f.e[j], e[j]);
  }
  EXPECT_EQ(fs::file_size(dir / "a.bin"), 32u + 24u * 64u);
}

TEST(Snapshot, LayoutIsLittleEndian) {
  const State s = random_state(16, 1);
  const std::string bytes = encode_snapshot(s, compute_derived(s).e);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), kSnapshotVersion);
  EXPECT_EQ(bytes[1], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 16);
  double t = 0.0;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(bytes[16 + i])) << (8 * i);
  std::memcpy(&t, &bits, 8);
  EXPECT_EQ(t, s.t);
}

TEST(Snapshot, RejectsVersionAndTruncation) {
  const State s = random_state(16, 2);
  std::string bytes = encode_snapshot(s, compute_derived(s).e);
  std::string bumped = bytes;
  bumped[0] = static_cast<char>(kSnapshotVersion + 1);
  EXPECT_THROW(decode_snapshot(bumped), FormatError);
  EXPECT_THROW(decode_snapshot(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_snapshot(bytes.substr(0, 10)), FormatError);
  EXPECT_NO_THROW(decode_snapshot(bytes));
}

TEST(Csv, FormatsWithFullPrecision) {
  CsvTable t({"a", "b"});
  t.add_row({0.1, 1.0 / 3.0});
  EXPECT_EQ(t.str(), "a,b\n0.10000000000000001,0.33333333333333331\n");
  EXPECT_THROW(t.add_row({1.0}), Error);
  const fs::path dir = scratch_dir("csv");
  t.write(dir / "x.csv");
  EXPECT_FALSE(fs::exists(dir / "x.csv.tmp"));
  EXPECT_EQ(detail::read_file(dir / "x.csv"), t.str());
}

TEST(Scenario, RowsMatchSnapshotsAndRunsAreDeterministic) {
  const ScenarioConfig sc = parse_scenario(kSmallScenario);
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  const ScenarioResult ra = run_scenario(sc, a);
  const ScenarioResult rb = run_scenario(sc, b);
  EXPECT_TRUE(ra.passed());
  EXPECT_EQ(ra.checks.size(), 7u);
  const std::string csv = detail::read_file(ra.diagnostics_csv);
  EXPECT_EQ(csv, detail::read_file(rb.diagnostics_csv));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 11);
  EXPECT_EQ(ra.snapshot_count, 11u);
  for (std::size_t i = 0; i < 11; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06zu.bin", i);
    EXPECT_EQ(detail::read_file(a / "snapshots" / name), detail::read_file(b / "snapshots" / name));
  }
  const auto j = nlohmann::json::parse(detail::read_file(a / "summary.json"));
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["checks"].size(), ra.checks.size());
}

TEST(Scenario, FailingCheckIsReported) {
  std::string text = kSmallScenario;
  text += "tol.mass = -1\n";
  const ScenarioResult r = run_scenario(parse_scenario(text), scratch_dir("fail"));
  EXPECT_FALSE(r.passed());
  int failed = 0;
  for (const auto& c : r.checks) failed += !c.pass;
  EXPECT_EQ(failed, 1);
}

TEST(Scenario, VacuumLeavesNoCsv) {
  const fs::path dir = scratch_dir("vacuum");
  const ScenarioConfig sc = parse_scenario("n = 32\ninitial = smooth\ninitial.rho_amp = 1.5\nchecks = energy\n");
  EXPECT_THROW(run_scenario(sc, dir), VacuumError);
  EXPECT_FALSE(fs::exists(dir / "diagnostics.csv"));
}

TEST(Scenario, AlignmentNeedsVanishingForce) {
  const ScenarioConfig sc =
      parse_scenario("n = 32\nt_end = 0.1\nforce = trig\nchecks = alignment\nsnapshots.save = false\n");
  EXPECT_THROW(run_scenario(sc, scratch_dir("align")), ConfigError);
}

TEST(Mollification, ValidatesEpsList) {
  SimConfig c;
  c.n_points = 64;
  c.t_end = 0.1;
  const double h = kTwoPi / 64;
  EXPECT_THROW(mollification_convergence(c, {0.8, 0.4}, {0.1}), ConfigError);
  EXPECT_THROW(mollification_convergence(c, {0.8, 0.4, 0.4}, {0.1}), ConfigError);
  EXPECT_THROW(mollification_convergence(c, {0.8, 0.4, 3.0 * h}, {0.1}), ConfigError);
}

TEST(Mollification, SmoothDataConvergesFast) {
  SimConfig c;
  c.n_points = 64;
  c.t_end = 0.1;
  c.initial.name = "smooth";
  const MollificationReport m = mollification_convergence(c, {0.8, 0.6, 0.5}, {0.1});
  ASSERT_EQ(m.times.size(), 2u);
  for (const auto& row : m.u_distances)
    for (double d : row) EXPECT_LT(d, 5e-2);
  EXPECT_EQ(m.u_distances.front().size(), 2u);
}

TEST(Uniqueness, IdenticalDataGivesZero) {
  SimConfig c;
  c.n_points = 32;
  c.t_end = 0.2;
  c.output_stride = 0.05;
  const UniquenessReport z = uniqueness_gronwall(c, 0.0);
  EXPECT_EQ(z.max_phi(), 0.0);
  const UniquenessReport a = uniqueness_gronwall(c, 1e-6);
  ASSERT_GT(a.phi.front(), 0.0);
  for (std::size_t i = 0; i < a.t.size(); ++i)
    EXPECT_LE(a.phi[i], a.phi.front() * std::exp(a.rate * a.t[i]) * (1 + 1e-12));
  const UniquenessReport b = uniqueness_gronwall(c, 1e-5);
  EXPECT_LT(normalized_gap(a, b), 0.05);
}

TEST(Uniqueness, FunctionalMatchesDefinition) {
  const State s = random_state(32, 4);
  State p = perturb_state(s, 0.01);
  const Snapshot a{s, compute_derived(s), std::nullopt}, b{p, compute_derived(p), std::nullopt};
  // Brute-force Phi on the nodes.
  double want = 0.0;
  for (std::size_t j = 0; j < 32; ++j) {
    const double rs = s.rho[j] + p.rho[j], ud = s.u[j] - p.u[j], rd = s.rho[j] - p.rho[j];
    const double qd = a.derived.e[j] / s.rho[j] - b.derived.e[j] / p.rho[j];
    want += rs * ud * ud + rd * rd / rs + qd * qd;
  }
  want *= kTwoPi / 32;
  EXPECT_NEAR(stability_functional(a, b), want, 1e-12 * want);
}

TEST(OutputRoot, HonoursEnvironment) {
  ::setenv("FALIGN_OUTPUT_ROOT", "/tmp/somewhere", 1);
  EXPECT_EQ(output_root(), fs::path("/tmp/somewhere"));
  ::unsetenv("FALIGN_OUTPUT_ROOT");
  EXPECT_EQ(output_root(), fs::path("falign_out"));
}
