#pragma once

// Run configuration: YAML text <-> RunConfig, with defaults, validation and
// line-numbered errors.

#include "rydberg/geometry.hpp"
#include "rydberg/io/csv.hpp"
#include "rydberg/params.hpp"
#include "rydberg/rates.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydberg::io {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Solver { single, cumulant, trajectories, meanfield, rates };

inline const char* solver_name(Solver s) {
  switch (s) {
    case Solver::single: return "single";
    case Solver::cumulant: return "cumulant";
    case Solver::trajectories: return "trajectories";
    case Solver::meanfield: return "meanfield";
    case Solver::rates: return "rates";
  }
  return "?";
}

inline std::optional<Solver> solver_from_name(const std::string& s) {
  for (Solver v : {Solver::single, Solver::cumulant, Solver::trajectories, Solver::meanfield, Solver::rates})
    if (s == solver_name(v)) return v;
  return std::nullopt;
}

struct ScanAxis {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  int count = 1;
  bool log = false;

  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) {
      const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      v.push_back(log ? min * std::pow(max / min, f) : min + f * (max - min));
    }
    if (count > 1) v.back() = max;
    return v;
  }
  friend bool operator==(const ScanAxis&, const ScanAxis&) = default;
};

inline const std::vector<std::string>& scan_parameter_names() {
  static const std::vector<std::string> names{"omega", "delta", "c3", "gamma_s", "gamma_p", "gamma_r", "gamma_d"};
  return names;
}

inline double& parameter_ref(SystemParams& p, const std::string& name) {
  if (name == "omega") return p.omega;
  if (name == "delta") return p.delta;
  if (name == "c3") return p.c3;
  if (name == "gamma_s") return p.gamma_s;
  if (name == "gamma_p") return p.gamma_p;
  if (name == "gamma_r") return p.gamma_r;
  if (name == "gamma_d") return p.gamma_d;
  throw ConfigError("unknown parameter '" + name + "'");
}

struct LatticeConfig {
  int dimension = 1;
  int truncation = 0;  // 0: 100 in 1D, 8 in 3D
  geometry::Region region = geometry::Region::cube;
  int ring = 0;  // > 0: finite ring of this many sites instead of an infinite lattice
  bool correlations = false;  // write per-point correlation tables
  int effective_truncation() const { return truncation > 0 ? truncation : (dimension == 1 ? 100 : 8); }
  friend bool operator==(const LatticeConfig&, const LatticeConfig&) = default;
};

struct IntegrationConfig {
  double dt = 0.0;  // 0: largest stable step
  double t_max = 2000.0;
  double steady_tol = 1e-9;
  double divergence_bound = 10.0;
  friend bool operator==(const IntegrationConfig&, const IntegrationConfig&) = default;
};

struct TrajectoryConfig {
  int atoms = 4;
  double dt = 0.002;
  double burn_in = 50.0;
  double sample_time = 4500.0;
  double sample_interval = 0.5;
  int count = 10;
  friend bool operator==(const TrajectoryConfig&, const TrajectoryConfig&) = default;
};

struct MeanFieldConfig {
  int edge = 6;
  double t_max = 80.0;
  double dt = 0.0;  // 0: automatic
  friend bool operator==(const MeanFieldConfig&, const MeanFieldConfig&) = default;
};

struct RatesConfig {
  int atoms = 1080;
  std::array<double, 3> aspect{2.0, 4.0, 5.0};
  double n3d = 1.0;
  rates::Dephasing dephasing = rates::Dephasing::signed_sum;
  double dt = 0.02;
  double t_max = 200.0;
  double average_fraction = 0.5;
  friend bool operator==(const RatesConfig&, const RatesConfig&) = default;
};

inline const char* dephasing_name(rates::Dephasing d) {
  switch (d) {
    case rates::Dephasing::signed_sum: return "signed";
    case rates::Dephasing::absolute_sum: return "absolute";
    case rates::Dephasing::homogeneous: return "homogeneous";
  }
  return "?";
}

struct RunConfig {
  Solver solver = Solver::single;
  SystemParams params;
  LatticeConfig lattice;
  IntegrationConfig integration;
  TrajectoryConfig trajectories;
  MeanFieldConfig meanfield;
  RatesConfig rates;
  std::vector<ScanAxis> scan;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "out";
  int workers = 0;  // 0: environment default

  /// Cartesian product of the scan axes applied to `params`, first axis slowest.
  std::vector<SystemParams> grid() const {
    std::vector<SystemParams> out{params};
    for (const auto& ax : scan) {
      std::vector<SystemParams> next;
      for (const auto& p : out)
        for (double v : ax.values()) {
          SystemParams q = p;
          parameter_ref(q, ax.name) = v;
          next.push_back(q);
        }
      out = std::move(next);
    }
    return out;
  }

  void validate() const {
    params.validate();
    std::set<std::string> seen;
    for (const auto& ax : scan) {
      const auto& names = scan_parameter_names();
      if (std::find(names.begin(), names.end(), ax.name) == names.end())
        throw ConfigError("scan axis references unknown parameter '" + ax.name + "'");
      if (!seen.insert(ax.name).second) throw ConfigError("scan axis '" + ax.name + "' repeated");
      if (ax.count < 1) throw ConfigError("scan axis '" + ax.name + "' count must be >= 1");
      if (!std::isfinite(ax.min) || !std::isfinite(ax.max)) throw ConfigError("scan bounds must be finite");
      if (ax.log && !(ax.min > 0 && ax.max > 0)) throw ConfigError("log scan axis '" + ax.name + "' needs positive bounds");
    }
    for (const auto& p : grid()) p.validate();
    if (lattice.dimension != 1 && lattice.dimension != 3) throw ConfigError("lattice.dimension must be 1 or 3");
    if (lattice.truncation < 0) throw ConfigError("lattice.truncation must be >= 1");
    if (lattice.ring < 0 || lattice.ring > 12) throw ConfigError("lattice.ring must be in [2, 12] (0 disables)");
    if (lattice.ring == 1) throw ConfigError("lattice.ring must be in [2, 12] (0 disables)");
    if (integration.dt < 0 || !(integration.t_max > 0) || !(integration.steady_tol > 0) ||
        !(integration.divergence_bound > 1))
      throw ConfigError("integration settings out of range");
    if (trajectories.atoms < 1 || trajectories.atoms > 10) throw ConfigError("trajectories.atoms must be in [1, 10]");
    if (!(trajectories.dt > 0) || trajectories.burn_in < 0 || !(trajectories.sample_time > 0) ||
        !(trajectories.sample_interval > 0) || trajectories.count < 1)
      throw ConfigError("trajectory settings out of range");
    if (meanfield.edge < 1 || !(meanfield.t_max > 0) || meanfield.dt < 0)
      throw ConfigError("meanfield settings out of range");
    if (rates.atoms < 2 || !(rates.n3d > 0) || !(rates.dt > 0) || !(rates.t_max > 0) ||
        !(rates.average_fraction > 0 && rates.average_fraction <= 1))
      throw ConfigError("rates settings out of range");
    for (double a : rates.aspect)
      if (!(a > 0)) throw ConfigError("rates.aspect entries must be > 0");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (solver == Solver::rates && seeds.size() < 2) throw ConfigError("rates runs need at least two seeds");
    if (output.empty()) throw ConfigError("output must not be empty");
    if (workers < 0) throw ConfigError("workers must be >= 0");
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.solver == b.solver && a.params == b.params && a.lattice == b.lattice && a.integration == b.integration &&
           a.trajectories == b.trajectories && a.meanfield == b.meanfield && a.rates == b.rates && a.scan == b.scan &&
           a.seeds == b.seeds && a.output == b.output && a.workers == b.workers;
  }
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a scalar", line_of(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has an invalid value '" + n.Scalar() + "'", line_of(n));
  }
}

/// Iterates a mapping, rejecting keys outside `allowed`.
template <typename Fn>
void each_key(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed, Fn&& fn) {
  if (!map.IsMap()) throw ConfigError("'" + where + "' must be a mapping", line_of(map));
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "'" + (where.empty() ? "" : " in '" + where + "'"), line_of(kv.first));
    fn(key, kv.second);
  }
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax error: " + e.msg, e.mark.line >= 0 ? e.mark.line + 1 : -1);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping");
  using detail::scalar;
  RunConfig c;
  bool have_solver = false;
  const std::set<std::string> top{"solver", "omega", "delta", "c3", "gamma_s", "gamma_p", "gamma_r", "gamma_d",
                                  "lattice", "integration", "trajectories", "meanfield", "rates", "scan", "seeds",
                                  "output", "workers"};
  detail::each_key(root, "", top, [&](const std::string& k, const YAML::Node& v) {
    if (k == "solver") {
      const auto s = solver_from_name(scalar<std::string>(v, k));
      if (!s) throw ConfigError("unknown solver '" + v.Scalar() + "'", detail::line_of(v));
      c.solver = *s;
      have_solver = true;
    } else if (k == "lattice") {
      detail::each_key(v, k, {"dimension", "truncation", "region", "ring", "correlations"},
                       [&](const std::string& kk, const YAML::Node& vv) {
                         if (kk == "dimension") c.lattice.dimension = scalar<int>(vv, kk);
                         if (kk == "truncation") c.lattice.truncation = scalar<int>(vv, kk);
                         if (kk == "ring") c.lattice.ring = scalar<int>(vv, kk);
                         if (kk == "correlations") c.lattice.correlations = scalar<bool>(vv, kk);
                         if (kk == "region") {
                           const auto r = scalar<std::string>(vv, kk);
                           if (r == "cube") c.lattice.region = geometry::Region::cube;
                           else if (r == "ball") c.lattice.region = geometry::Region::ball;
                           else throw ConfigError("region must be cube or ball", detail::line_of(vv));
                         }
                       });
    } else if (k == "integration") {
      detail::each_key(v, k, {"dt", "t_max", "steady_tol", "divergence_bound"},
                       [&](const std::string& kk, const YAML::Node& vv) {
                         if (kk == "dt") c.integration.dt = scalar<double>(vv, kk);
                         if (kk == "t_max") c.integration.t_max = scalar<double>(vv, kk);
                         if (kk == "steady_tol") c.integration.steady_tol = scalar<double>(vv, kk);
                         if (kk == "divergence_bound") c.integration.divergence_bound = scalar<double>(vv, kk);
                       });
    } else if (k == "trajectories") {
      detail::each_key(v, k, {"atoms", "dt", "burn_in", "sample_time", "sample_interval", "count"},
                       [&](const std::string& kk, const YAML::Node& vv) {
                         auto& t = c.trajectories;
                         if (kk == "atoms") t.atoms = scalar<int>(vv, kk);
                         if (kk == "dt") t.dt = scalar<double>(vv, kk);
                         if (kk == "burn_in") t.burn_in = scalar<double>(vv, kk);
                         if (kk == "sample_time") t.sample_time = scalar<double>(vv, kk);
                         if (kk == "sample_interval") t.sample_interval = scalar<double>(vv, kk);
                         if (kk == "count") t.count = scalar<int>(vv, kk);
                       });
    } else if (k == "meanfield") {
      detail::each_key(v, k, {"edge", "t_max", "dt"}, [&](const std::string& kk, const YAML::Node& vv) {
        if (kk == "edge") c.meanfield.edge = scalar<int>(vv, kk);
        if (kk == "t_max") c.meanfield.t_max = scalar<double>(vv, kk);
        if (kk == "dt") c.meanfield.dt = scalar<double>(vv, kk);
      });
    } else if (k == "rates") {
      detail::each_key(v, k, {"atoms", "aspect", "n3d", "dephasing", "dt", "t_max", "average_fraction"},
                       [&](const std::string& kk, const YAML::Node& vv) {
                         auto& r = c.rates;
                         if (kk == "atoms") r.atoms = scalar<int>(vv, kk);
                         if (kk == "n3d") r.n3d = scalar<double>(vv, kk);
                         if (kk == "dt") r.dt = scalar<double>(vv, kk);
                         if (kk == "t_max") r.t_max = scalar<double>(vv, kk);
                         if (kk == "average_fraction") r.average_fraction = scalar<double>(vv, kk);
                         if (kk == "aspect") {
                           if (!vv.IsSequence() || vv.size() != 3)
                             throw ConfigError("rates.aspect must be a list of 3 numbers", detail::line_of(vv));
                           for (std::size_t i = 0; i < 3; ++i) r.aspect[i] = scalar<double>(vv[i], kk);
                         }
                         if (kk == "dephasing") {
                           const auto d = scalar<std::string>(vv, kk);
                           if (d == "signed") r.dephasing = rates::Dephasing::signed_sum;
                           else if (d == "absolute") r.dephasing = rates::Dephasing::absolute_sum;
                           else if (d == "homogeneous") r.dephasing = rates::Dephasing::homogeneous;
                           else throw ConfigError("dephasing must be signed, absolute or homogeneous", detail::line_of(vv));
                         }
                       });
    } else if (k == "scan") {
      if (!v.IsSequence()) throw ConfigError("scan must be a list of axes", detail::line_of(v));
      for (const auto& ax : v) {
        ScanAxis a;
        bool named = false;
        detail::each_key(ax, "scan", {"name", "min", "max", "count", "spacing"},
                         [&](const std::string& kk, const YAML::Node& vv) {
                           if (kk == "name") {
                             a.name = scalar<std::string>(vv, kk);
                             named = true;
                           }
                           if (kk == "min") a.min = scalar<double>(vv, kk);
                           if (kk == "max") a.max = scalar<double>(vv, kk);
                           if (kk == "count") a.count = scalar<int>(vv, kk);
                           if (kk == "spacing") {
                             const auto s = scalar<std::string>(vv, kk);
                             if (s != "linear" && s != "log")
                               throw ConfigError("spacing must be linear or log", detail::line_of(vv));
                             a.log = s == "log";
                           }
                         });
        if (!named) throw ConfigError("scan axis needs a name", detail::line_of(ax));
        const auto& names = scan_parameter_names();
        if (std::find(names.begin(), names.end(), a.name) == names.end())
          throw ConfigError("scan axis references unknown parameter '" + a.name + "'", detail::line_of(ax));
        if (a.count < 1) throw ConfigError("scan axis '" + a.name + "' count must be >= 1", detail::line_of(ax));
        c.scan.push_back(a);
      }
    } else if (k == "seeds") {
      c.seeds.clear();
      if (v.IsScalar()) {
        c.seeds.push_back(scalar<std::uint64_t>(v, k));
      } else if (v.IsSequence()) {
        for (const auto& s : v) c.seeds.push_back(scalar<std::uint64_t>(s, k));
      } else {
        throw ConfigError("seeds must be an integer or a list", detail::line_of(v));
      }
    } else if (k == "output") {
      c.output = scalar<std::string>(v, k);
    } else if (k == "workers") {
      c.workers = scalar<int>(v, k);
    } else {
      parameter_ref(c.params, k) = scalar<double>(v, k);
    }
  });
  if (!have_solver) throw ConfigError("missing required key 'solver'");
  try {
    c.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// YAML text that parses back to an equal RunConfig.
inline std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  auto num = [](double v) { return format_number(v); };
  o << "solver: " << solver_name(c.solver) << "\n";
  o << "omega: " << num(c.params.omega) << "\n";
  o << "delta: " << num(c.params.delta) << "\n";
  o << "c3: " << num(c.params.c3) << "\n";
  o << "gamma_s: " << num(c.params.gamma_s) << "\n";
  o << "gamma_p: " << num(c.params.gamma_p) << "\n";
  o << "gamma_r: " << num(c.params.gamma_r) << "\n";
  o << "gamma_d: " << num(c.params.gamma_d) << "\n";
  o << "lattice:\n  dimension: " << c.lattice.dimension << "\n  truncation: " << c.lattice.truncation
    << "\n  region: " << (c.lattice.region == geometry::Region::ball ? "ball" : "cube") << "\n  ring: " << c.lattice.ring
    << "\n  correlations: " << (c.lattice.correlations ? "true" : "false") << "\n";
  o << "integration:\n  dt: " << num(c.integration.dt) << "\n  t_max: " << num(c.integration.t_max)
    << "\n  steady_tol: " << num(c.integration.steady_tol) << "\n  divergence_bound: " << num(c.integration.divergence_bound)
    << "\n";
  const auto& t = c.trajectories;
  o << "trajectories:\n  atoms: " << t.atoms << "\n  dt: " << num(t.dt) << "\n  burn_in: " << num(t.burn_in)
    << "\n  sample_time: " << num(t.sample_time) << "\n  sample_interval: " << num(t.sample_interval)
    << "\n  count: " << t.count << "\n";
  o << "meanfield:\n  edge: " << c.meanfield.edge << "\n  t_max: " << num(c.meanfield.t_max)
    << "\n  dt: " << num(c.meanfield.dt) << "\n";
  const auto& r = c.rates;
  o << "rates:\n  atoms: " << r.atoms << "\n  aspect: [" << num(r.aspect[0]) << ", " << num(r.aspect[1]) << ", "
    << num(r.aspect[2]) << "]\n  n3d: " << num(r.n3d) << "\n  dephasing: " << dephasing_name(r.dephasing)
    << "\n  dt: " << num(r.dt) << "\n  t_max: " << num(r.t_max) << "\n  average_fraction: " << num(r.average_fraction)
    << "\n";
  if (!c.scan.empty()) {
    o << "scan:\n";
    for (const auto& a : c.scan)
      o << "  - {name: " << a.name << ", min: " << num(a.min) << ", max: " << num(a.max) << ", count: " << a.count
        << ", spacing: " << (a.log ? "log" : "linear") << "}\n";
  }
  o << "seeds: [";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? ", " : "") << c.seeds[i];
  o << "]\n";
  o << "output: \"" << c.output << "\"\n";
  o << "workers: " << c.workers << "\n";
  return o.str();
}

}  // namespace rydberg::io
