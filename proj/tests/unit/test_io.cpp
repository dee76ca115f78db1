#include "rydberg/io/run.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

using namespace rydberg;
using namespace rydberg::io;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rydberg_io_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalDefaults) {
  const auto c = parse_config("solver: single\nomega: 0.4\n");
  EXPECT_EQ(c.solver, Solver::single);
  EXPECT_EQ(c.params.omega, 0.4);
  EXPECT_EQ(c.params.gamma_s, 1.0);
  EXPECT_EQ(c.params.gamma_p, 1.0);
  EXPECT_EQ(c.params.gamma_r, 0.3);
  EXPECT_EQ(c.lattice.effective_truncation(), 100);
  EXPECT_EQ(c.rates.atoms, 1080);
  EXPECT_EQ(c.rates.aspect, (std::array<double, 3>{2, 4, 5}));
  RunConfig d = c;
  d.lattice.dimension = 3;
  EXPECT_EQ(d.lattice.effective_truncation(), 8);
}

TEST(Config, Errors) {
  const auto e = error_of("solver: single\nomega: 0.4\ngamma_q: 1\n");
  EXPECT_NE(e.find("gamma_q"), std::string::npos);
  EXPECT_NE(e.find("line 3"), std::string::npos);
  EXPECT_NE(error_of("solver: single\nlattice:\n  dimenson: 3\n").find("dimenson"), std::string::npos);
  EXPECT_NE(error_of("solver: single\nscan:\n  - {name: omega, min: 0, max: 1, count: 0}\n").find("count"),
            std::string::npos);
  EXPECT_NE(error_of("solver: single\nscan:\n  - {name: beta, min: 0, max: 1, count: 2}\n").find("beta"),
            std::string::npos);
  EXPECT_NE(error_of("omega: 0.4\n").find("solver"), std::string::npos);
  EXPECT_NE(error_of("solver: warp\n").find("warp"), std::string::npos);
  EXPECT_NE(error_of("solver: single\nomega: fast\n").find("omega"), std::string::npos);
  EXPECT_NE(error_of("solver: single\nomega: -1\n").find("omega"), std::string::npos);
  EXPECT_NE(error_of("solver: rates\nseeds: [1]\n").find("seeds"), std::string::npos);
  EXPECT_NE(error_of("solver: single\nomega: [1\n").find("YAML"), std::string::npos);
}

TEST(Config, RenderRoundTrip) {
  RunConfig c;
  c.solver = Solver::rates;
  c.params.omega = 0.1 + 0.2;  // not exactly representable in short decimal
  c.params.delta = -1.0 / 3.0;
  c.params.c3 = 5000;
  c.params.gamma_d = 1e-7;
  c.lattice = {3, 6, geometry::Region::ball, 0, true};
  c.integration.dt = 0.003;
  c.trajectories.atoms = 6;
  c.meanfield.edge = 4;
  c.rates.aspect = {1.5, 2, 7.25};
  c.rates.dephasing = rates::Dephasing::absolute_sum;
  c.scan = {{"delta", -2, 2, 9, false}, {"c3", 10, 1000, 3, true}};
  c.seeds = {3, 1, 4, 1, 5};
  c.output = "runs/a b";
  c.workers = 3;
  const auto back = parse_config(render_config(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(render_config(back), render_config(c));
}

TEST(Config, ShippedConfigsParse) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(RYDBERG_CONFIG_DIR)) {
    if (e.path().extension() != ".yaml") continue;
    ++n;
    EXPECT_NO_THROW(parse_config(read_file(e.path()))) << e.path();
  }
  EXPECT_GE(n, 5);
}

TEST(Config, GridProduct) {
  const auto c = parse_config(
      "solver: single\nscan:\n  - {name: omega, min: 0.1, max: 0.3, count: 3}\n"
      "  - {name: c3, min: 1, max: 100, count: 3, spacing: log}\n");
  const auto g = c.grid();
  ASSERT_EQ(g.size(), 9u);
  EXPECT_DOUBLE_EQ(g[0].omega, 0.1);
  EXPECT_DOUBLE_EQ(g[1].c3, 10.0);
  EXPECT_DOUBLE_EQ(g[2].c3, 100.0);
  EXPECT_DOUBLE_EQ(g[8].omega, 0.3);
}

TEST(Csv, NumbersAndSchema) {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0})
    EXPECT_EQ(parse_number(format_number(v)), v);
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_THROW(parse_number("1,5"), CsvError);
  const auto t = CsvTable::parse("# comment\na,b\n1,2\n\n3,4\n");
  EXPECT_EQ(t.column("b"), (std::vector<double>{2, 4}));
  try {
    t.require({"a", "x", "y"});
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("x, y"), std::string::npos);
  }
  EXPECT_THROW(CsvTable::parse("a,b\n1\n"), CsvError);
}

TEST(Manifest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, CumulantNonInteractingMatchesSingleAtom) {
  auto c = parse_config(
      "solver: cumulant\nc3: 0\nlattice: {dimension: 1, truncation: 4}\n"
      "scan:\n  - {name: omega, min: 0.1, max: 1.0, count: 4}\n");
  const auto dir = scratch("cumulant0");
  const auto r = run(c, dir, 2);
  EXPECT_EQ(r.exit_code, kExitOk);
  const auto t = CsvTable::read(dir / "cumulant.csv");
  ASSERT_EQ(t.rows(), 4u);
  const auto om = t.column("omega"), s = t.column("s"), p = t.column("p");
  for (std::size_t i = 0; i < t.rows(); ++i) {
    SystemParams q;
    q.omega = om[i];
    const auto ss = single_atom_steady_state(q);
    EXPECT_NEAR(s[i], ss.s, 1e-7);
    EXPECT_NEAR(p[i], ss.p, 1e-7);
    EXPECT_EQ(t.cell(i, "status"), "converged");
  }
  EXPECT_TRUE(verify_manifest(dir / "manifest.json").empty());
}

TEST(Run, CorrelationSnapshot) {
  auto c = parse_config("solver: cumulant\nomega: 0.4\nc3: 20\nlattice: {dimension: 1, truncation: 6, correlations: true}\n");
  const auto dir = scratch("corr");
  run(c, dir, 1);
  const auto t = CsvTable::read(dir / "correlations/point_00000.csv");
  t.require({"dx", "dy", "dz", "r", "r_eff", "connected_pp_ss", "pp_ss_re", "pp_ss_im", "sp_ps_re"});
  EXPECT_EQ(t.rows(), 6u);
  EXPECT_LT(t.column("connected_pp_ss")[0], 0.0);  // nearest neighbour is blockaded
}

TEST(Run, DeterministicAcrossWorkerCounts) {
  auto c = parse_config(
      "solver: rates\nomega: 0.5\nc3: 50\nrates: {atoms: 40, t_max: 20, dt: 0.05}\nseeds: [1, 2, 3, 4, 5]\n"
      "scan:\n  - {name: delta, min: -1, max: 1, count: 3}\n");
  const auto a = scratch("det_a"), b = scratch("det_b");
  run(c, a, 1);
  const auto r = run(c, b, 4);
  EXPECT_EQ(read_file(a / "rates.csv"), read_file(b / "rates.csv"));
  for (int s = 1; s <= 5; ++s) {
    const std::string f = "seeds/seed_" + std::to_string(s) + ".csv";
    EXPECT_EQ(read_file(a / f), read_file(b / f));
  }
  // Five seed sub-files are referenced by the manifest.
  int seed_files = 0;
  for (const auto& f : r.manifest["files"])
    if (f["path"].get<std::string>().rfind("seeds/", 0) == 0) ++seed_files;
  EXPECT_EQ(seed_files, 5);
  const auto t = CsvTable::read(b / "rates.csv");
  t.require({"delta", "mean", "std", "n_seeds"});
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_GT(t.column("std")[1], 0.0);
}

TEST(Run, ManifestDetectsTampering) {
  const auto c = parse_config("solver: single\nomega: 0.3\n");
  const auto dir = scratch("tamper");
  run(c, dir, 1);
  EXPECT_TRUE(verify_manifest(dir / "manifest.json").empty());
  std::ofstream(dir / "single.csv", std::ios::app) << "extra\n";
  EXPECT_EQ(verify_manifest(dir / "manifest.json"), std::vector<std::string>{"single.csv"});
}

TEST(Run, DivergenceGivesExitCodeTwo) {
  const auto c = parse_config(
      "solver: cumulant\nomega: 0.4\nc3: 1000\ndelta: 8\nlattice: {dimension: 1, truncation: 10}\n"
      "integration: {t_max: 20}\n");
  const auto dir = scratch("diverge");
  const auto r = run(c, dir, 1);
  EXPECT_EQ(r.exit_code, kExitDiverged);
  EXPECT_EQ(r.manifest["points"][0]["status"], "diverged");
  EXPECT_EQ(CsvTable::read(dir / "cumulant.csv").cell(0, "status"), "diverged");
}

TEST(Run, HardErrorRemovesPartialOutputs) {
  // Second point violates the step bound; the first point's snapshot must go.
  const auto c = parse_config(
      "solver: cumulant\nomega: 0.4\nlattice: {dimension: 1, truncation: 3, correlations: true}\n"
      "integration: {dt: 0.01}\nscan:\n  - {name: c3, min: 0, max: 1000, count: 2}\n");
  const auto dir = scratch("cleanup");
  EXPECT_THROW(run(c, dir, 1), InvalidParameter);
  EXPECT_FALSE(fs::exists(dir / "correlations/point_00000.csv"));
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "cumulant.csv"));
}

TEST(Analyze, LorentzianAndSchemaErrors) {
  CsvTable t({"delta", "mean"});
  for (int i = -10; i <= 10; ++i) {
    const double x = 0.3 * i;
    t.add_row({format_number(x), format_number(0.5 / (1 + std::pow((x - 0.2) / 0.7, 2)))});
  }
  const auto parsed = CsvTable::parse(t.render());
  const auto j = analyze("lorentzian", parsed, {});
  EXPECT_NEAR(j["params"]["fwhm"].get<double>(), 1.4, 1e-8);
  EXPECT_NEAR(j["params"]["center"].get<double>(), 0.2, 1e-8);
  EXPECT_EQ(j["n_points"], 21);
  AnalyzeOptions o;
  o.y = "value";
  try {
    analyze("lorentzian", parsed, o);
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("value"), std::string::npos);
  }
}

TEST(Analyze, PowerLawAndCrossoverFixture) {
  CsvTable t({"x", "y"});
  for (double x : {1.0, 3.0, 10.0, 30.0}) t.add_row({format_number(x), format_number(2 * std::pow(x, -0.5))});
  const auto j = analyze("powerlaw", t, {});
  EXPECT_NEAR(j["params"]["exponent"].get<double>(), -0.5, 1e-12);

  AnalyzeOptions o;
  o.group = "f";
  const auto fx = analyze("crossover", CsvTable::read(std::string(RYDBERG_FIXTURE_DIR) + "/crossover_two_densities.csv"), o);
  ASSERT_EQ(fx["fits"].size(), 2u);
  EXPECT_EQ(fx["fits"][0]["group"], "100");
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.yaml") << "solver: single\ngamma_q: 1\n";
  std::ofstream(dir / "ok.yaml") << "solver: single\nomega: 0.2\n";
  const std::string sim = RYDBERG_SIM_BINARY;
  auto code = [](const std::string& cmd) {
    const int r = std::system((cmd + " 2>/dev/null >/dev/null").c_str());
    return WEXITSTATUS(r);
  };
  EXPECT_EQ(code(sim + " single --config " + (dir / "bad.yaml").string()), 1);
  EXPECT_EQ(code(sim + " single --config " + (dir / "ok.yaml").string() + " --out " + (dir / "o").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o/single.csv"));
  EXPECT_EQ(code(sim + " cumulant --config " + (dir / "ok.yaml").string()), 1);  // solver mismatch
  EXPECT_EQ(code(sim + " analyze powerlaw " + (dir / "o/single.csv").string()), 1);  // no x,y columns
  EXPECT_EQ(code(sim + " verify " + (dir / "o/manifest.json").string()), 0);
}
