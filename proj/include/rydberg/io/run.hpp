#pragma once

// Run orchestration: executes a RunConfig grid with one of the solvers and
// persists CSV tables plus a manifest. Also the CSV-driven fit reports.

#include "rydberg/analysis.hpp"
#include "rydberg/cumulant/solver.hpp"
#include "rydberg/io/config.hpp"
#include "rydberg/io/csv.hpp"
#include "rydberg/io/manifest.hpp"
#include "rydberg/meanfield.hpp"
#include "rydberg/model.hpp"
#include "rydberg/parallel.hpp"
#include "rydberg/rates.hpp"
#include "rydberg/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#ifndef RYDBERG_VERSION
#define RYDBERG_VERSION "dev"
#endif

namespace rydberg::io {

inline constexpr int kExitOk = 0;
inline constexpr int kExitHardError = 1;
inline constexpr int kExitDiverged = 2;

struct RunResult {
  nlohmann::json manifest;
  int exit_code = kExitOk;
};

namespace detail {

inline const std::vector<std::string>& param_columns() {
  static const std::vector<std::string> c{"omega", "delta", "c3", "gamma_s", "gamma_p", "gamma_r", "gamma_d"};
  return c;
}

inline std::vector<std::string> param_cells(const SystemParams& p) {
  return {format_number(p.omega),   format_number(p.delta),   format_number(p.c3),     format_number(p.gamma_s),
          format_number(p.gamma_p), format_number(p.gamma_r), format_number(p.gamma_d)};
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline nlohmann::json params_json(const SystemParams& p) {
  return {{"omega", p.omega},     {"delta", p.delta},     {"c3", p.c3},          {"gamma_s", p.gamma_s},
          {"gamma_p", p.gamma_p}, {"gamma_r", p.gamma_r}, {"gamma_d", p.gamma_d}};
}

inline std::string point_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

struct PointRecord {
  std::string status = "ok";
  std::vector<std::vector<std::string>> rows;
};

/// Outer/inner worker split: parallelize the grid first, leftovers go inside.
inline std::pair<int, int> split_workers(int workers, std::size_t tasks) {
  const int outer = std::max(1, std::min<int>(workers, static_cast<int>(tasks)));
  return {outer, std::max(1, workers / outer)};
}

inline cumulant::PairLattice unit_lattice(const LatticeConfig& l) {
  if (l.ring > 0) return cumulant::PairLattice::ring(1.0, l.ring);
  if (l.dimension == 1) return cumulant::PairLattice::chain(1.0, l.effective_truncation());
  return cumulant::PairLattice::cubic(1.0, geometry::LatticeSpec::cubic(l.effective_truncation(), l.region));
}

inline std::string correlation_csv(const cumulant::Equations& eqs, const cumulant::CumulantState& y) {
  std::vector<std::string> header{"dx", "dy", "dz", "r", "r_eff", "multiplicity", "coupling", "connected_pp_ss"};
  const auto& pairs = eqs.active_pairs();
  for (int k : pairs) {
    const auto a = TransitionOp::from_index(k / cumulant::kOps), b = TransitionOp::from_index(k % cumulant::kOps);
    const std::string name = a.name().substr(6) + "_" + b.name().substr(6);
    header.push_back(name + "_re");
    header.push_back(name + "_im");
  }
  CsvTable t(header);
  const auto& lat = eqs.lattice();
  for (std::size_t o = 0; o < lat.size(); ++o) {
    const auto& orb = lat.orbits[o];
    const cplx conn = y.pair(o, ops::pp, ops::ss) - y.single(ops::pp) * y.single(ops::ss);
    std::vector<std::string> row{format_number(static_cast<long long>(orb.representative.x)),
                                 format_number(static_cast<long long>(orb.representative.y)),
                                 format_number(static_cast<long long>(orb.representative.z)),
                                 format_number(orb.distance),
                                 format_number(orb.effective_distance),
                                 format_number(static_cast<long long>(orb.multiplicity())),
                                 format_number(orb.coupling),
                                 format_number(conn.real())};
    for (int k : pairs) {
      const cplx v = y.pair(o)[k];
      row.push_back(format_number(v.real()));
      row.push_back(format_number(v.imag()));
    }
    t.add_row(std::move(row));
  }
  return t.render();
}

}  // namespace detail

/// Executes the configured grid, writing into `out_dir`. Throws on hard
/// errors after removing everything this run wrote.
inline RunResult run(const RunConfig& cfg, const fs::path& out_dir, int workers) {
  cfg.validate();
  if (workers < 1) workers = default_workers();
  const auto started = utc_timestamp();
  OutputSet out(out_dir);
  const auto grid = cfg.grid();
  std::vector<detail::PointRecord> records(grid.size());
  std::string table_name;
  std::vector<std::string> header;

  try {
    fs::create_directories(out_dir);
    switch (cfg.solver) {
      case Solver::single: {
        table_name = "single.csv";
        header = detail::concat(detail::param_columns(), {"g", "s", "p", "sg_re", "sg_im"});
        parallel_for(grid.size(), workers, [&](std::size_t i) {
          const auto ss = single_atom_steady_state(grid[i]);
          records[i].rows.push_back(detail::concat(
              detail::param_cells(grid[i]), {format_number(ss.g), format_number(ss.s), format_number(ss.p),
                                             format_number(ss.sg.real()), format_number(ss.sg.imag())}));
        });
        break;
      }
      case Solver::cumulant: {
        table_name = "cumulant.csv";
        header = detail::concat(detail::param_columns(),
                                {"status", "t_reached", "max_derivative", "s", "p", "sg_re", "sg_im", "orbits"});
        const auto unit = detail::unit_lattice(cfg.lattice);
        parallel_for(grid.size(), workers, [&](std::size_t i) {
          const cumulant::Equations eqs(grid[i], cumulant::rescale(unit, grid[i].c3));
          cumulant::IntegrationSettings s{cfg.integration.dt, cfg.integration.t_max, cfg.integration.steady_tol,
                                          cfg.integration.divergence_bound};
          if (s.dt == 0.0) s.dt = cumulant::IntegrationSettings::stable_dt(eqs);
          const auto r = cumulant::solve_steady(eqs, s);
          records[i].status = cumulant::status_name(r.status);
          const cplx sg = r.state.single(ops::sg);
          records[i].rows.push_back(detail::concat(
              detail::param_cells(grid[i]),
              {cumulant::status_name(r.status), format_number(r.t_reached), format_number(r.max_derivative),
               format_number(r.population(Level::s)), format_number(r.population(Level::p)), format_number(sg.real()),
               format_number(sg.imag()), format_number(static_cast<long long>(eqs.n_orbits()))}));
          if (cfg.lattice.correlations)
            out.write("correlations/point_" + detail::point_tag(i) + ".csv", detail::correlation_csv(eqs, r.state));
        });
        break;
      }
      case Solver::trajectories: {
        table_name = "trajectories.csv";
        header = detail::concat(detail::param_columns(),
                                {"atoms", "observable", "mean", "std_error", "n_trajectories", "sample_time"});
        const auto [outer, inner] = detail::split_workers(workers, grid.size());
        parallel_for(grid.size(), outer, [&, inner = inner](std::size_t i) {
          const auto& t = cfg.trajectories;
          trajectory::TrajectorySettings s;
          s.dt = t.dt;
          s.burn_in = t.burn_in;
          s.sample_time = t.sample_time;
          s.sample_interval = t.sample_interval;
          s.n_trajectories = t.count;
          s.seed = cfg.seeds.front();
          const auto est = trajectory::estimate_steady(grid[i], t.atoms, s, inner);
          std::vector<std::string> keys{"s", "p"};
          for (int d = 1; d <= t.atoms / 2; ++d) keys.push_back("pp_ss_d" + std::to_string(d));
          for (int d = 1; d <= t.atoms / 2; ++d) keys.push_back("sp_ps_d" + std::to_string(d));
          for (const auto& k : keys) {
            const auto& e = est.at(k);
            records[i].rows.push_back(detail::concat(
                detail::param_cells(grid[i]),
                {format_number(static_cast<long long>(t.atoms)), k, format_number(e.mean), format_number(e.std_error),
                 format_number(static_cast<long long>(e.n_samples)), format_number(t.sample_time)}));
          }
        });
        break;
      }
      case Solver::meanfield: {
        table_name = "meanfield.csv";
        header = detail::concat(detail::param_columns(),
                                {"seed", "status", "t", "max_coherence", "mean_s", "mean_p", "fixed_point_check",
                                 "inverse_c_imag", "max_eigen_imag"});
        const std::size_t ns = cfg.seeds.size();
        std::vector<std::vector<std::string>> rows(grid.size() * ns);
        std::vector<std::string> status(grid.size() * ns);
        parallel_for(grid.size() * ns, workers, [&](std::size_t k) {
          const std::size_t i = k / ns;
          const auto seed = cfg.seeds[k % ns];
          const auto& p = grid[i];
          const auto lat = meanfield::random_lattice(cfg.meanfield.edge, p.c3, seed);
          const double dt = cfg.meanfield.dt > 0 ? cfg.meanfield.dt : meanfield::stable_dt(lat, p);
          const auto check = meanfield::no_fixed_point_check(lat.v, p);
          std::string st = "ok";
          meanfield::TracePoint last{};
          try {
            const auto ev = meanfield::evolve(lat, p, cfg.meanfield.t_max, dt);
            CsvTable trace({"t", "max_coherence", "mean_s", "mean_p"});
            for (const auto& tp : ev.trace)
              trace.add_row({format_number(tp.t), format_number(tp.max_coherence), format_number(tp.mean_s),
                             format_number(tp.mean_p)});
            out.write("traces/point_" + detail::point_tag(i) + "_seed_" + std::to_string(seed) + ".csv",
                      trace.render());
            last = ev.trace.back();
          } catch (const meanfield::PositivityViolation&) {
            st = "diverged";
          }
          status[k] = st;
          rows[k] = detail::concat(
              detail::param_cells(p),
              {std::to_string(seed), st, format_number(last.t), format_number(last.max_coherence),
               format_number(last.mean_s), format_number(last.mean_p), check.passes ? "pass" : "fail",
               format_number(check.inverse_c_imag), format_number(check.max_eigen_imag)});
        });
        for (std::size_t k = 0; k < rows.size(); ++k) {
          auto& rec = records[k / ns];
          rec.rows.push_back(rows[k]);
          if (status[k] != "ok") rec.status = status[k];
        }
        break;
      }
      case Solver::rates: {
        table_name = "rates.csv";
        header = detail::concat(detail::param_columns(), {"status", "mean", "std", "n_seeds"});
        const auto& rc = cfg.rates;
        const std::size_t ns = cfg.seeds.size();
        std::vector<rates::AtomCloud> clouds(ns);
        parallel_for(ns, workers, [&](std::size_t s) {
          clouds[s] = rates::sample_cloud(static_cast<std::size_t>(rc.atoms), rc.n3d, cfg.seeds[s], rc.aspect);
        });
        std::vector<rates::RateRun> runs(grid.size() * ns);
        std::vector<bool> failed(grid.size() * ns, false);
        rates::RateSettings rs;
        rs.dt = rc.dt;
        rs.t_max = rc.t_max;
        rs.average_fraction = rc.average_fraction;
        parallel_for(grid.size() * ns, workers, [&](std::size_t k) {
          const auto& p = grid[k / ns];
          const rates::Interactions in(clouds[k % ns], p.c3, rc.dephasing);
          const std::size_t n = rc.dephasing == rates::Dephasing::homogeneous ? 1 : clouds[k % ns].positions.size();
          try {
            runs[k] = rates::integrate(in, p, rs, rates::RateState::ground(n));
          } catch (const rates::IntegrationError&) {
            failed[k] = true;
          }
        });
        for (std::size_t s = 0; s < ns; ++s) {
          CsvTable t(detail::concat(detail::param_columns(),
                                    {"seed", "status", "time_average_s", "final_mean_s", "final_mean_p",
                                     "oscillation_amplitude", "halvings"}));
          for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& r = runs[i * ns + s];
            const bool f = failed[i * ns + s];
            t.add_row(detail::concat(
                detail::param_cells(grid[i]),
                {std::to_string(cfg.seeds[s]), f ? "diverged" : "ok", format_number(f ? 0.0 : r.time_average_s),
                 format_number(f ? 0.0 : r.final.s.mean()), format_number(f ? 0.0 : r.final.p.mean()),
                 format_number(f ? 0.0 : r.oscillation_amplitude), format_number(static_cast<long long>(r.halvings))}));
          }
          out.write("seeds/seed_" + std::to_string(cfg.seeds[s]) + ".csv", t.render());
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
          double m = 0.0, v = 0.0;
          bool any_failed = false;
          for (std::size_t s = 0; s < ns; ++s) {
            any_failed = any_failed || failed[i * ns + s];
            m += runs[i * ns + s].time_average_s;
          }
          m /= static_cast<double>(ns);
          for (std::size_t s = 0; s < ns; ++s) v += std::pow(runs[i * ns + s].time_average_s - m, 2);
          const double sd = std::sqrt(v / static_cast<double>(ns - 1));
          records[i].status = any_failed ? "diverged" : "ok";
          records[i].rows.push_back(
              detail::concat(detail::param_cells(grid[i]),
                             {records[i].status, format_number(any_failed ? 0.0 : m),
                              format_number(any_failed ? 0.0 : sd), format_number(static_cast<long long>(ns))}));
        }
        break;
      }
    }

    CsvTable table(header);
    for (auto& rec : records)
      for (auto& row : rec.rows) table.add_row(std::move(row));
    out.write(table_name, table.render());

    int code = kExitOk;
    auto points = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (records[i].status == "diverged") code = kExitDiverged;
      points.push_back({{"index", i}, {"params", detail::params_json(grid[i])}, {"status", records[i].status}});
    }
    nlohmann::json m;
    m["tool"] = "sim";
    m["version"] = RYDBERG_VERSION;
    m["solver"] = solver_name(cfg.solver);
    m["config"] = render_config(cfg);
    m["started"] = started;
    m["finished"] = utc_timestamp();
    m["workers"] = workers;
    m["table"] = table_name;
    if (cfg.solver == Solver::rates || cfg.solver == Solver::meanfield) m["seeds"] = cfg.seeds;
    m["points"] = points;
    m["files"] = files_json(out.entries());
    m["exit_code"] = code;
    write_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
    return {m, code};
  } catch (...) {
    out.remove_all();
    throw;
  }
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string x;
  std::string y;
  std::string err;
  std::string group;
  bool offset = false;
  double window = 1.0;
  std::string method = "many_body";
};

inline nlohmann::json analyze_lorentzian(const CsvTable& t, const AnalyzeOptions& o) {
  const std::string xc = o.x.empty() ? "delta" : o.x, yc = o.y.empty() ? "mean" : o.y;
  std::vector<std::string> need{xc, yc};
  if (!o.err.empty()) need.push_back(o.err);
  t.require(need);
  const auto x = t.column(xc), y = t.column(yc);
  std::optional<std::vector<double>> e;
  if (!o.err.empty()) e = t.column(o.err);
  const auto f = analysis::fit_lorentzian(x, y, e, o.offset);
  return {{"fitter", "lorentzian"},
          {"params", {{"amplitude", f.amplitude}, {"center", f.center}, {"fwhm", f.fwhm}, {"offset", f.offset}}},
          {"errors", {{"amplitude", f.error(0)}, {"center", f.error(1)}, {"fwhm", f.error(2)}, {"offset", o.offset ? f.error(3) : 0.0}}},
          {"residual", f.residual_norm},
          {"n_points", x.size()}};
}

inline nlohmann::json analyze_powerlaw(const CsvTable& t, const AnalyzeOptions& o) {
  const std::string xc = o.x.empty() ? "x" : o.x, yc = o.y.empty() ? "y" : o.y;
  t.require({xc, yc});
  const auto x = t.column(xc), y = t.column(yc);
  const auto f = analysis::fit_power_law(x, y);
  double res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) res += std::pow(std::log(y[i]) - std::log(f.coefficient * std::pow(x[i], f.exponent)), 2);
  return {{"fitter", "powerlaw"},
          {"params", {{"coefficient", f.coefficient}, {"exponent", f.exponent}}},
          {"errors", {{"coefficient", f.coefficient_error}, {"exponent", f.exponent_error}}},
          {"residual", std::sqrt(res)},
          {"n_points", x.size()}};
}

inline nlohmann::json analyze_crossover(const CsvTable& t, const AnalyzeOptions& o) {
  const std::string xc = o.x.empty() ? "omega" : o.x, yc = o.y.empty() ? "r" : o.y;
  std::vector<std::string> need{xc, yc};
  if (!o.group.empty()) need.push_back(o.group);
  t.require(need);
  const auto x = t.column(xc), y = t.column(yc);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const std::string g = o.group.empty() ? "all" : t.cell(i, o.group);
    if (!groups.count(g)) order.push_back(g);
    groups[g].first.push_back(x[i]);
    groups[g].second.push_back(y[i]);
  }
  auto fits = nlohmann::json::array();
  for (const auto& g : order) {
    const auto& [w, r] = groups[g];
    const auto f = analysis::fit_crossover(w, r);
    fits.push_back({{"group", g},
                    {"params", {{"a", f.a}, {"omega_c", f.omega_c}}},
                    {"errors", {{"a", f.a_error}, {"omega_c", f.omega_c_error}}},
                    {"residual", std::sqrt(f.sse)},
                    {"crossover_detected", f.crossover_detected},
                    {"n_points", w.size()}});
  }
  if (fits.size() == 1 && o.group.empty()) {
    auto single = fits[0];
    single.erase("group");
    single["fitter"] = "crossover";
    return single;
  }
  return {{"fitter", "crossover"}, {"group_column", o.group}, {"fits", fits}, {"n_points", x.size()}};
}

inline nlohmann::json analyze_blockade(const CsvTable& t, const AnalyzeOptions& o) {
  const std::string xc = o.x.empty() ? "r_eff" : o.x, yc = o.y.empty() ? "connected_pp_ss" : o.y;
  t.require({xc, yc});
  const auto x = t.column(xc), y = t.column(yc);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(x[i])) pts.emplace_back(x[i], y[i]);
  analysis::BlockadeMethod m;
  if (o.method == "many_body") m = analysis::BlockadeMethod::many_body;
  else if (o.method == "two_body") m = analysis::BlockadeMethod::two_body;
  else throw InvalidParameter("method must be many_body or two_body");
  const auto b = analysis::extract_blockade_radius(pts, o.window, m);
  return {{"fitter", "blockade"},
          {"params", {{"r_b", b.r_b}, {"plateau_value", b.plateau_value}, {"window", b.smoothing_window}, {"method", o.method}}},
          {"errors", {{"r_b", o.window / 2}}},
          {"residual", 0.0},
          {"n_points", pts.size()}};
}

inline nlohmann::json analyze_edge(const CsvTable& t, const AnalyzeOptions& o) {
  const std::string xc = o.x.empty() ? "c3" : o.x, yc = o.y.empty() ? "delta" : o.y;
  t.require({xc, yc, "status"});
  const auto c3 = t.column(xc), delta = t.column(yc);
  std::vector<analysis::EdgeSample> scan;
  for (std::size_t i = 0; i < t.rows(); ++i) scan.push_back({c3[i], delta[i], t.cell(i, "status") == "diverged"});
  const auto f = analysis::divergence_edge_fit(scan);
  auto edges = nlohmann::json::array();
  for (const auto& [c, d] : f.edge) edges.push_back({{"c3", c}, {"delta_edge", d}});
  return {{"fitter", "edge"},
          {"params", {{"coefficient", f.fit.coefficient}, {"exponent", f.fit.exponent}}},
          {"errors", {{"coefficient", f.fit.coefficient_error}, {"exponent", f.fit.exponent_error}}},
          {"residual", 0.0},
          {"edges", edges},
          {"n_points", scan.size()}};
}

inline nlohmann::json analyze(const std::string& kind, const CsvTable& t, const AnalyzeOptions& o) {
  if (kind == "lorentzian") return analyze_lorentzian(t, o);
  if (kind == "powerlaw") return analyze_powerlaw(t, o);
  if (kind == "crossover") return analyze_crossover(t, o);
  if (kind == "blockade") return analyze_blockade(t, o);
  if (kind == "edge") return analyze_edge(t, o);
  throw InvalidParameter("unknown analysis '" + kind + "'");
}

}  // namespace rydberg::io
