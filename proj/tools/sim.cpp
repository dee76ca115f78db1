// Command-line front end: solver runs from a YAML config and CSV fit reports.

#include "rydberg/io/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace rydberg;

int default_worker_count() { return default_workers(); }

int run_solver(const std::string& solver, const std::string& config_path, const std::string& out_override,
               int workers) {
  const auto text = io::read_file(config_path);
  io::RunConfig cfg = io::parse_config(text);
  const auto requested = io::solver_from_name(solver);
  if (!requested || *requested != cfg.solver)
    throw io::ConfigError("config declares solver '" + std::string(io::solver_name(cfg.solver)) +
                          "' but the command was '" + solver + "'");
  const std::string out = out_override.empty() ? cfg.output : out_override;
  const int w = workers > 0 ? workers : (cfg.workers > 0 ? cfg.workers : default_worker_count());
  const auto result = io::run(cfg, out, w);
  std::size_t diverged = 0;
  for (const auto& p : result.manifest["points"])
    if (p["status"] == "diverged") ++diverged;
  std::cerr << "sim: " << result.manifest["points"].size() << " point(s), " << diverged << " diverged; wrote "
            << out << "/" << result.manifest["table"].get<std::string>() << "\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven-dissipative three-level Rydberg lattice simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  for (const char* name : {"single", "cumulant", "trajectories", "meanfield", "rates"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " solver over the configured grid");
    sub->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--workers", workers, "worker threads (default: SIM_WORKERS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
  }

  auto* analyze = app.add_subcommand("analyze", "fit a CSV table and print a JSON report");
  analyze->require_subcommand(1);
  io::AnalyzeOptions opts;
  std::string input, report_path;
  for (const char* name : {"lorentzian", "powerlaw", "crossover", "blockade", "edge"}) {
    auto* sub = analyze->add_subcommand(name);
    sub->add_option("input", input, "input CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--x", opts.x, "abscissa column");
    sub->add_option("--y", opts.y, "ordinate column");
    sub->add_option("--report", report_path, "write the JSON report here instead of stdout");
    if (std::string(name) == "lorentzian") {
      sub->add_option("--err", opts.err, "per-point standard error column (weights)");
      sub->add_flag("--offset", opts.offset, "fit an additive offset");
    }
    if (std::string(name) == "crossover") sub->add_option("--group", opts.group, "fit each value of this column separately");
    if (std::string(name) == "blockade") {
      sub->add_option("--window", opts.window, "smoothing window in r_eff")->check(CLI::PositiveNumber);
      sub->add_option("--method", opts.method, "many_body or two_body")
          ->check(CLI::IsMember({"many_body", "two_body"}));
    }
  }

  auto* verify = app.add_subcommand("verify", "re-hash the files listed in a run manifest");
  std::string manifest_path;
  verify->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      const auto bad = io::verify_manifest(manifest_path);
      for (const auto& b : bad) std::cerr << "sim: hash mismatch or missing: " << b << "\n";
      return bad.empty() ? 0 : 1;
    }
    if (analyze->parsed()) {
      const std::string kind = analyze->get_subcommands().front()->get_name();
      const auto report = io::analyze(kind, io::CsvTable::read(input), opts);
      const std::string text = report.dump(2) + "\n";
      if (report_path.empty()) {
        std::cout << text;
      } else {
        io::write_atomic(report_path, text);
      }
      return 0;
    }
    const std::string solver = app.get_subcommands().front()->get_name();
    return run_solver(solver, config_path, out_dir, workers);
  } catch (const std::exception& e) {
    std::cerr << "sim: error: " << e.what() << "\n";
    return 1;
  }
}
