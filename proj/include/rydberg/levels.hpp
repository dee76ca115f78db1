#pragma once

// Three-level single-atom algebra: levels g, s, p and the nine transition
// operators sigma^{ab} = |a><b|.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <string>
#include <string_view>

namespace rydberg {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

enum class Level : int { g = 0, s = 1, p = 2 };

inline constexpr std::array<Level, 3> kLevels{Level::g, Level::s, Level::p};

inline constexpr char level_name(Level l) {
  switch (l) {
    case Level::g: return 'g';
    case Level::s: return 's';
    case Level::p: return 'p';
  }
  return '?';
}

/// sigma^{to,from} = |to><from|.
struct TransitionOp {
  Level to;
  Level from;

  /// Dense index in [0, 9): 3*to + from.
  constexpr int index() const { return 3 * static_cast<int>(to) + static_cast<int>(from); }

  static constexpr TransitionOp from_index(int k) {
    return {static_cast<Level>(k / 3), static_cast<Level>(k % 3)};
  }

  constexpr TransitionOp adjoint() const { return {from, to}; }

  std::string name() const { return {'s', 'i', 'g', 'm', 'a', '^', level_name(to), level_name(from)}; }

  friend constexpr bool operator==(TransitionOp, TransitionOp) = default;
};

/// U(1) charge under |p> -> e^{i phi}|p>: [to = p] - [from = p].
constexpr int u1_charge(TransitionOp op) {
  return (op.to == Level::p ? 1 : 0) - (op.from == Level::p ? 1 : 0);
}

/// Charge of a product of operators on distinct sites.
constexpr int u1_charge(TransitionOp a, TransitionOp b) { return u1_charge(a) + u1_charge(b); }

namespace ops {
inline constexpr TransitionOp gg{Level::g, Level::g};
inline constexpr TransitionOp gs{Level::g, Level::s};
inline constexpr TransitionOp gp{Level::g, Level::p};
inline constexpr TransitionOp sg{Level::s, Level::g};
inline constexpr TransitionOp ss{Level::s, Level::s};
inline constexpr TransitionOp sp{Level::s, Level::p};
inline constexpr TransitionOp pg{Level::p, Level::g};
inline constexpr TransitionOp ps{Level::p, Level::s};
inline constexpr TransitionOp pp{Level::p, Level::p};
}  // namespace ops

/// 3x3 matrix of |to><from|.
inline Eigen::Matrix3cd matrix(TransitionOp op) {
  Eigen::Matrix3cd m = Eigen::Matrix3cd::Zero();
  m(static_cast<int>(op.to), static_cast<int>(op.from)) = 1.0;
  return m;
}

/// sigma^{ab} sigma^{cd} = delta_{bc} sigma^{ad}; returns false when the product vanishes.
constexpr bool multiply(TransitionOp x, TransitionOp y, TransitionOp& out) {
  if (x.from != y.to) return false;
  out = {x.to, y.from};
  return true;
}

/// <sigma^{ab}> = Tr(rho |a><b|) = rho(b, a).
template <typename Derived>
cplx expectation(const Eigen::MatrixBase<Derived>& rho, TransitionOp op) {
  return rho(static_cast<int>(op.from), static_cast<int>(op.to));
}

}  // namespace rydberg
