#pragma once

// RK4 integration to steady state, divergence detection, connected
// correlations, decoherence extrapolation and divergence scans.

#include "rydberg/cumulant/equations.hpp"
#include "rydberg/parallel.hpp"
#include "rydberg/polyfit.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rydberg::cumulant {

struct IntegrationSettings {
  double dt = 0.01;
  double t_max = 2000.0;
  double steady_tol = 1e-9;
  double divergence_bound = 10.0;

  /// dt * (largest rate + largest |V|) must stay below 1.
  void validate_for(const Equations& eqs) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be > 0");
    if (!(t_max > 0.0)) throw InvalidParameter("t_max must be > 0");
    if (!(steady_tol > 0.0)) throw InvalidParameter("steady_tol must be > 0");
    if (!(divergence_bound > 1.0)) throw InvalidParameter("divergence_bound must be > 1");
    const double f = eqs.max_frequency();
    if (!(dt * f < 1.0)) {
      std::ostringstream msg;
      msg << "dt = " << dt << " violates the stability bound dt < 1/" << f;
      throw InvalidParameter(msg.str());
    }
  }

  /// Largest step allowed by the bound (times a safety fraction), capped at `cap`.
  static double stable_dt(const Equations& eqs, double fraction = 0.9, double cap = 0.01) {
    return std::min(cap, fraction / eqs.max_frequency());
  }
};

enum class Status { converged, diverged, timed_out };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::diverged: return "diverged";
    case Status::timed_out: return "timed_out";
  }
  return "?";
}

struct SteadyOutcome {
  Status status = Status::timed_out;
  CumulantState state;
  double t_reached = 0.0;
  double max_derivative = 0.0;
  std::string reason;

  double population(Level l) const { return state.population(l); }
};

namespace detail {

inline double max_abs_active(const Equations& eqs, const CumulantState& y) {
  double m = 0.0;
  const cplx* s = y.singles();
  for (int a : eqs.active_singles()) m = std::max(m, std::abs(s[a]));
  for (std::size_t o = 0; o < y.n_orbits(); ++o) {
    const cplx* p = y.pair(o);
    for (int k : eqs.active_pairs()) m = std::max(m, std::abs(p[k]));
  }
  return m;
}

/// Empty string when the state is acceptable, otherwise the reason it diverged.
inline std::string divergence_reason(const Equations& eqs, const CumulantState& y, double bound) {
  for (const cplx& v : y.raw())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return "non-finite expectation";
  for (Level l : kLevels) {
    const double pop = y.population(l);
    if (pop < -1e-6 || pop > 1.0 + 1e-6) return std::string("population ") + level_name(l) + " out of range";
  }
  if (max_abs_active(eqs, y) > bound) return "expectation magnitude exceeds bound";
  return {};
}

inline void axpy(std::vector<cplx>& out, const std::vector<cplx>& y, double h, const std::vector<cplx>& k) {
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + h * k[i];
}

}  // namespace detail

/// Classic RK4 from state0 until convergence, divergence or t_max.
inline SteadyOutcome integrate_to_steady(const CumulantState& state0, const Equations& eqs,
                                         const IntegrationSettings& settings,
                                         const std::function<void(double, const CumulantState&)>& observer = {}) {
  settings.validate_for(eqs);
  const double dt = settings.dt;
  const std::size_t n = eqs.n_orbits();
  CumulantState y = state0, k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto& yr = y.raw();
  double t = 0.0;
  SteadyOutcome out;

  for (;;) {
    eqs.rhs(y, k1);
    out.max_derivative = detail::max_abs_active(eqs, k1);
    if (observer) observer(t, y);
    if (out.max_derivative <= settings.steady_tol) {
      out.status = Status::converged;
      break;
    }
    if (t >= settings.t_max) {
      out.status = Status::timed_out;
      break;
    }
    detail::axpy(tmp.raw(), yr, 0.5 * dt, k1.raw());
    eqs.rhs(tmp, k2);
    detail::axpy(tmp.raw(), yr, 0.5 * dt, k2.raw());
    eqs.rhs(tmp, k3);
    detail::axpy(tmp.raw(), yr, dt, k3.raw());
    eqs.rhs(tmp, k4);
    const auto &a = k1.raw(), &b = k2.raw(), &c = k3.raw(), &d = k4.raw();
    for (std::size_t i = 0; i < yr.size(); ++i) yr[i] += dt / 6.0 * (a[i] + 2.0 * (b[i] + c[i]) + d[i]);
    t += dt;

    auto reason = detail::divergence_reason(eqs, y, settings.divergence_bound);
    if (!reason.empty()) {
      out.status = Status::diverged;
      out.reason = std::move(reason);
      break;
    }
  }
  out.t_reached = t;
  out.state = std::move(y);
  return out;
}

/// Steady state from the all-ground initial condition.
inline SteadyOutcome solve_steady(const Equations& eqs, const IntegrationSettings& settings) {
  return integrate_to_steady(eqs.ground_state(), eqs, settings);
}

/// <sigma^pp_0 sigma^ss_d> - <sigma^pp><sigma^ss> for the orbit containing d.
inline double connected_correlation(const CumulantState& state, const Equations& eqs,
                                    const geometry::Displacement& d) {
  const int o = eqs.lattice().orbit_of(d);
  if (o < 0) throw InvalidParameter("displacement outside the stored region");
  const cplx v = state.pair(static_cast<std::size_t>(o), ops::pp, ops::ss) -
                 state.single(ops::pp) * state.single(ops::ss);
  if (std::abs(v.imag()) > 1e-6) throw NonConvergenceError("connected correlation has an imaginary part");
  return v.real();
}

inline double connected_correlation(const CumulantState& state, std::size_t orbit) {
  const cplx v = state.pair(orbit, ops::pp, ops::ss) - state.single(ops::pp) * state.single(ops::ss);
  if (std::abs(v.imag()) > 1e-6) throw NonConvergenceError("connected correlation has an imaginary part");
  return v.real();
}

/// Same lattice with every coupling multiplied by c3_new / c3_old (requires c3_old != 0).
inline PairLattice rescale(PairLattice l, double c3) {
  if (l.c3 == 0.0) throw InvalidParameter("cannot rescale a lattice built with c3 = 0");
  const double f = c3 / l.c3;
  for (auto& o : l.orbits) o.coupling *= f;
  l.neighbor_weights *= f;
  l.outside_weights *= f;
  l.coupling_sum *= f;
  l.max_abs_coupling *= std::abs(f);
  l.c3 = c3;
  return l;
}

struct ExtrapolationResult {
  double value = 0.0;  // constant term of the quartic
  PolynomialFit fit;
  std::vector<double> gamma_d;
  std::vector<double> population;
};

/// Quartic fit of the steady s population over gamma_d, evaluated at gamma_d = 0.
inline ExtrapolationResult decoherence_extrapolation(const SystemParams& params, const PairLattice& lattice,
                                                     const std::vector<double>& gamma_d_grid,
                                                     const IntegrationSettings& settings, int workers = 1) {
  if (gamma_d_grid.size() < 6) throw InvalidParameter("decoherence extrapolation needs at least 6 points");
  for (double g : gamma_d_grid)
    if (!(g > 0.1)) throw InvalidParameter("decoherence grid points must exceed 0.1");
  ExtrapolationResult out;
  out.gamma_d = gamma_d_grid;
  out.population.assign(gamma_d_grid.size(), 0.0);
  std::vector<SteadyOutcome> outcomes(gamma_d_grid.size());
  parallel_for(gamma_d_grid.size(), workers, [&](std::size_t i) {
    SystemParams p = params;
    p.gamma_d = gamma_d_grid[i];
    const Equations eqs(p, lattice);
    IntegrationSettings s = settings;
    s.dt = std::min(settings.dt, IntegrationSettings::stable_dt(eqs));
    outcomes[i] = solve_steady(eqs, s);
  });
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].status != Status::converged) {
      std::ostringstream msg;
      msg << "decoherence grid point gamma_d = " << gamma_d_grid[i] << " " << status_name(outcomes[i].status);
      throw NonConvergenceError(msg.str());
    }
    out.population[i] = outcomes[i].population(Level::s);
  }
  out.fit = polyfit(out.gamma_d, out.population, 4);
  out.value = out.fit.coefficients[0];
  return out;
}

struct ScanPoint {
  double omega = 0.0;
  double delta = 0.0;
  double c3 = 0.0;
};

struct ScanResult {
  ScanPoint point;
  Status status = Status::timed_out;
  double population_s = 0.0;
  double population_p = 0.0;
  double t_reached = 0.0;
  double max_derivative = 0.0;
};

/// Steady-state status at every grid point. `lattice` fixes geometry; its
/// couplings are rescaled to each point's c3.
inline std::vector<ScanResult> divergence_scan(const SystemParams& base, const PairLattice& lattice,
                                               const std::vector<ScanPoint>& grid,
                                               const IntegrationSettings& settings, int workers = 1) {
  std::vector<ScanResult> out(grid.size());
  const PairLattice& unit = lattice;
  if (unit.c3 == 0.0) throw InvalidParameter("divergence_scan needs a lattice built with nonzero c3");
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    SystemParams p = base;
    p.omega = grid[i].omega;
    p.delta = grid[i].delta;
    p.c3 = grid[i].c3;
    PairLattice l = rescale(unit, grid[i].c3);
    const Equations eqs(p, std::move(l));
    IntegrationSettings s = settings;
    s.dt = std::min(settings.dt, IntegrationSettings::stable_dt(eqs));
    const auto r = solve_steady(eqs, s);
    out[i] = {grid[i], r.status, r.population(Level::s), r.population(Level::p), r.t_reached, r.max_derivative};
  });
  return out;
}

/// Cumulant equations on a finite ring of n sites with ring couplings.
inline Equations ring_mode_build(const SystemParams& params, int n) {
  return Equations(params, PairLattice::ring(params.c3, n));
}

}  // namespace rydberg::cumulant
