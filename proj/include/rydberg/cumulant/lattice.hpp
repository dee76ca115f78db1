#pragma once

// Pair-storage lattice for the translationally invariant cumulant equations:
// displacement orbits, couplings, and the orbit-aggregated third-site weights.

#include "rydberg/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace rydberg::cumulant {

enum class Topology { chain, cubic, ring };

struct PairOrbit {
  geometry::Displacement representative;
  std::vector<geometry::Displacement> members;
  double coupling = 0.0;  // V for every member
  double distance = 0.0;  // r
  double effective_distance = 0.0;
  int multiplicity() const { return static_cast<int>(members.size()); }
};

struct PairLattice {
  Topology topology = Topology::chain;
  geometry::LatticeSpec spec;
  int ring_size = 0;
  bool symmetry_reduced = true;
  double c3 = 0.0;

  std::vector<PairOrbit> orbits;
  /// neighbor_weights(o, j) = sum of V(e) over e in R with d_o + e in orbit j.
  Eigen::MatrixXd neighbor_weights;
  /// sum of V(e) over e in R with d_o + e outside R and nonzero.
  Eigen::VectorXd outside_weights;
  double coupling_sum = 0.0;  // sum over all displacements in R
  double max_abs_coupling = 0.0;

  std::size_t size() const { return orbits.size(); }

  /// Orbit index of a displacement, or -1 when it is outside the stored region.
  int orbit_of(const geometry::Displacement& d) const {
    const auto m = wrap(d);
    if (!inside(m)) return -1;
    return lookup_[flat(m)];
  }

  // --- construction -------------------------------------------------------

  static PairLattice chain(double c3, int truncation, bool reduce = true) {
    PairLattice l;
    l.topology = Topology::chain;
    l.spec = geometry::LatticeSpec::chain(truncation);
    l.c3 = c3;
    l.symmetry_reduced = reduce;
    l.build([c3](const geometry::Displacement& d) { return geometry::chain_interaction(c3, d.x); });
    return l;
  }

  static PairLattice cubic(double c3, const geometry::LatticeSpec& spec, bool reduce = true) {
    spec.validate();
    if (spec.dimension != 3) throw InvalidParameter("cubic lattice needs dimension 3");
    if (!spec.axis_is_z()) throw InvalidParameter("3D cumulant lattice requires the z quantization axis");
    PairLattice l;
    l.topology = Topology::cubic;
    l.spec = spec;
    l.c3 = c3;
    l.symmetry_reduced = reduce;
    l.build([c3](const geometry::Displacement& d) { return geometry::interaction_strength(c3, d); });
    return l;
  }

  static PairLattice ring(double c3, int n, bool reduce = true) {
    if (n < 2 || n > 12) throw InvalidParameter("ring size must be in [2, 12]");
    PairLattice l;
    l.topology = Topology::ring;
    l.ring_size = n;
    l.spec = geometry::LatticeSpec::chain(n - 1);
    l.c3 = c3;
    l.symmetry_reduced = reduce;
    l.build([c3, n](const geometry::Displacement& d) { return geometry::ring_interaction(c3, 0, d.x, n); });
    return l;
  }

 private:
  std::vector<int> lookup_;
  int extent_ = 0;  // coordinates span [-extent, extent] (or [0, n) for rings)

  geometry::Displacement wrap(geometry::Displacement d) const {
    if (topology == Topology::ring) d.x = ((d.x % ring_size) + ring_size) % ring_size;
    return d;
  }
  bool inside(const geometry::Displacement& d) const {
    if (topology == Topology::ring) return d.y == 0 && d.z == 0 && d.x > 0 && d.x < ring_size;
    return spec.contains(d);
  }
  std::size_t flat(const geometry::Displacement& d) const {
    if (topology == Topology::ring) return static_cast<std::size_t>(d.x);
    const int w = 2 * extent_ + 1;
    if (topology == Topology::chain) return static_cast<std::size_t>(d.x + extent_);
    return static_cast<std::size_t>(((d.x + extent_) * w + (d.y + extent_)) * w + (d.z + extent_));
  }

  template <typename Coupling>
  void build(Coupling coupling) {
    std::vector<geometry::Displacement> all;
    if (topology == Topology::ring) {
      for (int x = 1; x < ring_size; ++x) all.push_back({x, 0, 0});
    } else {
      all = geometry::enumerate_displacements(spec);
    }

    // Orbits: reflection group (or ring inversion), or singletons when unreduced.
    if (!symmetry_reduced) {
      for (const auto& d : all) orbits.push_back({d, {d}});
    } else if (topology == Topology::ring) {
      for (int x = 1; 2 * x <= ring_size; ++x) {
        PairOrbit o{{x, 0, 0}, {{x, 0, 0}}};
        if (ring_size - x != x) o.members.push_back({ring_size - x, 0, 0});
        orbits.push_back(o);
      }
    } else {
      for (const auto& o : geometry::symmetry_reduce(all)) orbits.push_back({o.representative, o.members});
    }

    extent_ = spec.truncation;
    const std::size_t table =
        topology == Topology::ring ? static_cast<std::size_t>(ring_size)
        : topology == Topology::chain ? static_cast<std::size_t>(2 * extent_ + 1)
                                      : static_cast<std::size_t>(std::pow(2 * extent_ + 1, 3));
    lookup_.assign(table, -1);
    for (std::size_t o = 0; o < orbits.size(); ++o)
      for (const auto& m : orbits[o].members) lookup_[flat(m)] = static_cast<int>(o);

    std::vector<double> v_all(all.size());
    for (std::size_t k = 0; k < all.size(); ++k) {
      v_all[k] = coupling(all[k]);
      coupling_sum += v_all[k];
      max_abs_coupling = std::max(max_abs_coupling, std::abs(v_all[k]));
    }
    for (auto& o : orbits) {
      o.coupling = coupling(o.representative);
      if (topology == Topology::ring) {
        o.distance = std::min(o.representative.x, ring_size - o.representative.x);
        o.effective_distance = o.distance;
      } else if (topology == Topology::chain) {
        o.distance = std::abs(o.representative.x);
        o.effective_distance = o.distance;
      } else {
        o.distance = o.representative.norm();
        o.effective_distance = geometry::effective_distance(o.representative);
      }
    }

    const auto n = static_cast<Eigen::Index>(orbits.size());
    neighbor_weights = Eigen::MatrixXd::Zero(n, n);
    outside_weights = Eigen::VectorXd::Zero(n);
    for (Eigen::Index o = 0; o < n; ++o) {
      const auto& d = orbits[static_cast<std::size_t>(o)].representative;
      for (std::size_t k = 0; k < all.size(); ++k) {
        const auto m = wrap(d + all[k]);
        if (m.is_zero()) continue;
        if (!inside(m)) {
          outside_weights(o) += v_all[k];
          continue;
        }
        neighbor_weights(o, lookup_[flat(m)]) += v_all[k];
      }
    }
  }
};

}  // namespace rydberg::cumulant
