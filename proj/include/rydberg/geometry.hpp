#pragma once

// Lattice displacements, the anisotropic dipole coupling, effective distance,
// and reduction of displacements to reflection-symmetry orbits.

#include "rydberg/params.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace rydberg::geometry {

/// Integer lattice displacement. One-dimensional chains use x only.
struct Displacement {
  int x = 0;
  int y = 0;
  int z = 0;

  int norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(static_cast<double>(norm2())); }
  int max_norm() const { return std::max({std::abs(x), std::abs(y), std::abs(z)}); }
  bool is_zero() const { return x == 0 && y == 0 && z == 0; }
  Displacement operator-() const { return {-x, -y, -z}; }
  Displacement operator+(const Displacement& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Displacement operator-(const Displacement& o) const { return {x - o.x, y - o.y, z - o.z}; }

  friend bool operator==(const Displacement&, const Displacement&) = default;
  friend auto operator<=>(const Displacement&, const Displacement&) = default;
};

enum class Region { cube, ball };

struct LatticeSpec {
  int dimension = 3;
  int truncation = 8;
  std::array<double, 3> quantization_axis{0.0, 0.0, 1.0};
  Region region = Region::cube;

  static LatticeSpec chain(int truncation = 100) { return {1, truncation, {0.0, 0.0, 1.0}, Region::cube}; }
  static LatticeSpec cubic(int truncation = 8, Region region = Region::cube) {
    return {3, truncation, {0.0, 0.0, 1.0}, region};
  }

  void validate() const {
    if (dimension != 1 && dimension != 3) throw InvalidParameter("lattice dimension must be 1 or 3");
    if (truncation < 1) throw InvalidParameter("lattice truncation must be >= 1");
    const auto& a = quantization_axis;
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (!(std::abs(n - 1.0) < 1e-9)) throw InvalidParameter("quantization axis must be a unit vector");
  }

  bool axis_is_z() const {
    return quantization_axis[0] == 0.0 && quantization_axis[1] == 0.0 && quantization_axis[2] == 1.0;
  }

  /// Whether a nonzero displacement lies inside the truncation region.
  bool contains(const Displacement& d) const {
    if (d.is_zero()) return false;
    if (dimension == 1) return d.y == 0 && d.z == 0 && std::abs(d.x) <= truncation;
    if (region == Region::cube) return d.max_norm() <= truncation;
    return d.norm2() <= truncation * truncation;
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

/// All nonzero displacements in the truncation region, lexicographically ordered.
inline std::vector<Displacement> enumerate_displacements(const LatticeSpec& spec) {
  spec.validate();
  std::vector<Displacement> out;
  const int t = spec.truncation;
  if (spec.dimension == 1) {
    for (int x = -t; x <= t; ++x)
      if (x != 0) out.push_back({x, 0, 0});
    return out;
  }
  for (int x = -t; x <= t; ++x)
    for (int y = -t; y <= t; ++y)
      for (int z = -t; z <= t; ++z) {
        const Displacement d{x, y, z};
        if (spec.contains(d)) out.push_back(d);
      }
  return out;
}

/// 1 - 3 cos^2(theta) for the angle to the axis. Exact for integer vectors with the z axis.
inline double angular_factor(const Displacement& d, const std::array<double, 3>& axis = {0.0, 0.0, 1.0}) {
  if (axis[0] == 0.0 && axis[1] == 0.0 && axis[2] == 1.0) {
    const int r2 = d.norm2();
    return static_cast<double>(r2 - 3 * d.z * d.z) / static_cast<double>(r2);
  }
  const double dot = d.x * axis[0] + d.y * axis[1] + d.z * axis[2];
  const double f = 1.0 - 3.0 * dot * dot / static_cast<double>(d.norm2());
  return std::abs(f) < 1e-12 ? 0.0 : f;
}

/// V = c3 (1 - 3 cos^2 theta) / r^3.
inline double interaction_strength(double c3, const Displacement& d,
                                   const std::array<double, 3>& axis = {0.0, 0.0, 1.0}) {
  if (d.is_zero()) throw InvalidParameter("interaction_strength: zero displacement");
  const double r = d.norm();
  return c3 * angular_factor(d, axis) / (r * r * r);
}

/// Chain coupling with the angular factor absorbed into c3: V = c3 / |d|^3.
inline double chain_interaction(double c3, int d) {
  if (d == 0) throw InvalidParameter("chain_interaction: zero displacement");
  const double r = std::abs(d);
  return c3 / (r * r * r);
}

/// r_eff = r / |1 - 3 cos^2 theta|^{1/3}; infinite at the magic angle.
inline double effective_distance(const Displacement& d, const std::array<double, 3>& axis = {0.0, 0.0, 1.0}) {
  if (d.is_zero()) throw InvalidParameter("effective_distance: zero displacement");
  const double f = angular_factor(d, axis);
  if (f == 0.0) return std::numeric_limits<double>::infinity();
  return d.norm() / std::cbrt(std::abs(f));
}

struct SymmetryOrbit {
  Displacement representative;
  std::vector<Displacement> members;
  int multiplicity() const { return static_cast<int>(members.size()); }
};

/// Canonical image under sign flips of x, y, z and the x <-> y swap.
inline Displacement canonical_image(const Displacement& d) {
  const int ax = std::abs(d.x), ay = std::abs(d.y);
  return {std::max(ax, ay), std::min(ax, ay), std::abs(d.z)};
}

/// Partition displacements into orbits of the order-16 reflection group
/// (order 2 for chains: d <-> -d). Members keep input order; orbits are
/// ordered by first appearance.
inline std::vector<SymmetryOrbit> symmetry_reduce(const std::vector<Displacement>& displacements) {
  std::vector<SymmetryOrbit> orbits;
  std::map<Displacement, std::size_t> index;
  for (const auto& d : displacements) {
    const Displacement key = canonical_image(d);
    auto [it, inserted] = index.try_emplace(key, orbits.size());
    if (inserted) orbits.push_back({key, {}});
    orbits[it->second].members.push_back(d);
  }
  return orbits;
}

/// Ring coupling from the two shortest paths: c3 (1/r1^3 + 1/r2^3).
inline double ring_interaction(double c3, int i, int j, int n) {
  if (n < 2) throw InvalidParameter("ring_interaction: n must be >= 2");
  if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidParameter("ring_interaction: site out of range");
  if (i == j) throw InvalidParameter("ring_interaction: i == j");
  const int r1 = ((i - j) % n + n) % n;
  const int r2 = n - r1;
  return c3 * (1.0 / (double(r1) * r1 * r1) + 1.0 / (double(r2) * r2 * r2));
}

}  // namespace rydberg::geometry
