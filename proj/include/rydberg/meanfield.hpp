#pragma once

// Inhomogeneous product-state (Gutzwiller) dynamics on an open cubic block,
// and the linear-stability argument that rules out a nonzero coherence fixed
// point.

#include "rydberg/geometry.hpp"
#include "rydberg/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <random>
#include <string>
#include <vector>

namespace rydberg::meanfield {

class PositivityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Lattice {
  int edge = 0;
  std::vector<Eigen::Matrix3cd> sites;
  Eigen::MatrixXd v;  // V_ij, zero diagonal

  std::size_t size() const { return sites.size(); }
  cplx coherence(std::size_t i) const { return expectation(sites[i], ops::sp); }
};

/// Interaction table of an L x L x L block, site index x + L(y + L z).
inline Eigen::MatrixXd cubic_interactions(int edge, double c3) {
  if (edge < 1) throw InvalidParameter("lattice edge must be >= 1");
  const int n = edge * edge * edge;
  std::vector<geometry::Displacement> pos;
  for (int z = 0; z < edge; ++z)
    for (int y = 0; y < edge; ++y)
      for (int x = 0; x < edge; ++x) pos.push_back({x, y, z});
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) v(i, j) = v(j, i) = geometry::interaction_strength(c3, pos[j] - pos[i]);
  return v;
}

/// Random pure states mixed with the identity at weight 0.1.
inline Lattice random_lattice(int edge, double c3, std::uint64_t seed) {
  Lattice lat;
  lat.edge = edge;
  lat.v = cubic_interactions(edge, c3);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  lat.sites.resize(static_cast<std::size_t>(lat.v.rows()));
  for (auto& rho : lat.sites) {
    Eigen::Vector3cd psi;
    for (int k = 0; k < 3; ++k) psi(k) = {gauss(rng), gauss(rng)};
    psi.normalize();
    rho = 0.9 * psi * psi.adjoint() + 0.1 / 3.0 * Eigen::Matrix3cd::Identity();
  }
  return lat;
}

inline Lattice uniform_lattice(int edge, double c3, const Eigen::Matrix3cd& rho) {
  Lattice lat;
  lat.edge = edge;
  lat.v = cubic_interactions(edge, c3);
  lat.sites.assign(static_cast<std::size_t>(lat.v.rows()), rho);
  return lat;
}

/// Omega_eff,i = sum_j V_ij <sigma^sp_j> for every site.
inline Eigen::VectorXcd effective_rabi(const Lattice& lat) {
  Eigen::VectorXcd c(static_cast<Eigen::Index>(lat.size()));
  for (std::size_t j = 0; j < lat.size(); ++j) c(static_cast<Eigen::Index>(j)) = lat.coherence(j);
  return lat.v.cast<cplx>() * c;
}

/// -delta sigma^ss + Omega(sigma^gs + sigma^sg) + Omega_eff sigma^ps + conj(Omega_eff) sigma^sp.
inline Eigen::Matrix3cd local_hamiltonian(const SystemParams& p, cplx omega_eff) {
  Eigen::Matrix3cd h = single_site_hamiltonian(p);
  h += omega_eff * matrix(ops::ps) + std::conj(omega_eff) * matrix(ops::sp);
  return h;
}

inline Eigen::Matrix3cd effective_local_hamiltonian(std::size_t i, const Lattice& lat, const SystemParams& p) {
  cplx field{};
  for (std::size_t j = 0; j < lat.size(); ++j)
    field += lat.v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * lat.coherence(j);
  return local_hamiltonian(p, field);
}

struct TracePoint {
  double t;
  double max_coherence;
  double mean_s;
  double mean_p;
};

struct Evolution {
  Lattice final;
  std::vector<TracePoint> trace;
};

/// Largest stable step: inverse of the largest local rate plus the largest
/// row sum of |V|, scaled by `safety`.
inline double stable_dt(const Lattice& lat, const SystemParams& p, double safety = 0.5) {
  const double row = lat.v.cwiseAbs().rowwise().sum().maxCoeff();
  return safety / (p.largest_rate() + p.gamma_s + p.gamma_p + p.gamma_r + 2 * p.gamma_d + row);
}

/// RK4 on the full product state with every field recomputed per stage.
/// `record_every` thins the trace (in steps).
inline Evolution evolve(Lattice lat, const SystemParams& p, double t_max, double dt, int record_every = 100) {
  p.validate();
  if (!(dt > 0)) throw InvalidParameter("dt must be > 0");
  struct Jump3 {
    Eigen::Matrix3cd l, ldl;
    double rate;
  };
  std::vector<Jump3> jumps;
  for (const auto& j : single_site_jumps(p))
    if (j.rate != 0.0) jumps.push_back({j.op, j.op.adjoint() * j.op, j.rate});
  const std::size_t n = lat.size();
  const Eigen::MatrixXcd vc = lat.v.cast<cplx>();
  Eigen::VectorXcd c(static_cast<Eigen::Index>(n)), f(static_cast<Eigen::Index>(n));

  auto deriv = [&](const std::vector<Eigen::Matrix3cd>& rho, std::vector<Eigen::Matrix3cd>& out) {
    for (std::size_t j = 0; j < n; ++j) c(static_cast<Eigen::Index>(j)) = expectation(rho[j], ops::sp);
    f.noalias() = vc * c;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Matrix3cd h = local_hamiltonian(p, f(static_cast<Eigen::Index>(i)));
      Eigen::Matrix3cd d = -I * (h * rho[i] - rho[i] * h);
      for (const auto& j : jumps)
        d += j.rate * (j.l * rho[i] * j.l.adjoint() - 0.5 * (j.ldl * rho[i] + rho[i] * j.ldl));
      out[i] = d;
    }
  };

  auto record = [&](double t, Evolution& ev) {
    TracePoint tp{t, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      tp.max_coherence = std::max(tp.max_coherence, std::abs(lat.coherence(i)));
      tp.mean_s += lat.sites[i](1, 1).real();
      tp.mean_p += lat.sites[i](2, 2).real();
    }
    tp.mean_s /= static_cast<double>(n);
    tp.mean_p /= static_cast<double>(n);
    ev.trace.push_back(tp);
  };

  Evolution ev;
  std::vector<Eigen::Matrix3cd> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const long steps = static_cast<long>(std::ceil(t_max / dt));
  record(0.0, ev);
  for (long step = 1; step <= steps; ++step) {
    deriv(lat.sites, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = lat.sites[i] + 0.5 * dt * k1[i];
    deriv(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = lat.sites[i] + 0.5 * dt * k2[i];
    deriv(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = lat.sites[i] + dt * k3[i];
    deriv(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Matrix3cd r = lat.sites[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      lat.sites[i] = 0.5 * (r + r.adjoint());
    }
    if (step % record_every == 0 || step == steps) {
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(lat.sites[i], Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-6)
          throw PositivityViolation("site " + std::to_string(i) + " lost positivity at t=" +
                                    std::to_string(step * dt));
      }
      record(static_cast<double>(step) * dt, ev);
    }
  }
  ev.final = std::move(lat);
  return ev;
}

struct FixedPointReport {
  cplx c{};                 // <sigma^sp> per unit Omega_eff
  bool degenerate = false;  // s and p populations equal at V = 0
  double inverse_c_imag = 0.0;
  double max_eigen_imag = 0.0;
  bool passes = false;
  std::string message;
};

/// Linear response of one site: <sigma^sp> = C Omega_eff. A nonzero
/// self-consistent solution needs 1/C to be an eigenvalue of V, impossible
/// when imag(1/C) != 0 and V has a real spectrum.
inline FixedPointReport no_fixed_point_check(const Eigen::MatrixXd& v, const SystemParams& p) {
  if (v.rows() != v.cols()) throw InvalidParameter("V must be square");
  if (v.size() > 0 && (v - v.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw InvalidParameter("V must be symmetric");
  if (v.size() > 0 && v.diagonal().cwiseAbs().maxCoeff() != 0.0) throw InvalidParameter("V must have a zero diagonal");

  FixedPointReport r;
  const auto ss = single_atom_steady_state(p);
  // Coherence damping includes both dephasing channels; the detuning sign
  // follows H = -delta sigma^ss.
  const cplx denom = -I * p.delta - 0.5 * (p.gamma_s + p.gamma_p + p.gamma_r + 2.0 * p.gamma_d);
  r.c = I * (ss.s - ss.p) / denom;
  Eigen::EigenSolver<Eigen::MatrixXd> es(v, false);
  r.max_eigen_imag = es.eigenvalues().imag().cwiseAbs().maxCoeff();
  if (r.c == cplx{}) {
    r.degenerate = true;
    r.message = "degenerate: s and p populations coincide, C = 0";
    return r;
  }
  r.inverse_c_imag = (1.0 / r.c).imag();
  const bool real_spectrum = r.max_eigen_imag < 1e-10;
  r.passes = real_spectrum && r.inverse_c_imag != 0.0;
  r.message = r.passes ? "only the zero coherence solution exists"
                       : (real_spectrum ? "1/C is real" : "spectrum of V is not real");
  return r;
}

}  // namespace rydberg::meanfield
