#pragma once

// Exact reference solutions: Liouvillian construction, one-atom and two-atom
// steady states.

#include "rydberg/levels.hpp"
#include "rydberg/params.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <vector>

namespace rydberg {

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JumpOperator {
  Eigen::MatrixXcd op;
  double rate;
};

namespace detail {
inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}
}  // namespace detail

/// Superoperator acting on column-stacked density matrices, vec(A X B) = (B^T (x) A) vec(X).
inline Eigen::MatrixXcd liouvillian(const Eigen::MatrixXcd& h, const std::vector<JumpOperator>& jumps) {
  const Eigen::Index d = h.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  Eigen::MatrixXcd l = -I * (detail::kron(id, h) - detail::kron(h.transpose(), id));
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    const Eigen::MatrixXcd ldl = j.op.adjoint() * j.op;
    l += j.rate * (detail::kron(j.op.conjugate(), j.op) - 0.5 * detail::kron(id, ldl) -
                   0.5 * detail::kron(ldl.transpose(), id));
  }
  return l;
}

/// Apply the master-equation generator directly to a density matrix.
inline Eigen::MatrixXcd lindblad_rhs(const Eigen::MatrixXcd& h, const std::vector<JumpOperator>& jumps,
                                     const Eigen::MatrixXcd& rho) {
  Eigen::MatrixXcd out = -I * (h * rho - rho * h);
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    const Eigen::MatrixXcd ldl = j.op.adjoint() * j.op;
    out += j.rate * (j.op * rho * j.op.adjoint() - 0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

/// Null vector of the Liouvillian with the first row replaced by the trace
/// functional, reshaped to a density matrix.
inline Eigen::MatrixXcd steady_state(const Eigen::MatrixXcd& l, Eigen::Index dim) {
  Eigen::MatrixXcd a = l;
  a.row(0).setZero();
  for (Eigen::Index i = 0; i < dim; ++i) a(0, i + i * dim) = 1.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(a.rows());
  rhs(0) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw SingularSystemError("steady state is not unique (singular Liouvillian)");
  const Eigen::VectorXcd x = lu.solve(rhs);
  const double residual = (l * x).norm();
  if (!(residual < 1e-9 * std::max(1.0, l.norm()))) {
    throw NonConvergenceError("null-space solve residual too large: " + std::to_string(residual));
  }
  Eigen::MatrixXcd rho = Eigen::Map<const Eigen::MatrixXcd>(x.data(), dim, dim);
  return 0.5 * (rho + rho.adjoint());
}

inline std::vector<JumpOperator> single_site_jumps(const SystemParams& p) {
  std::vector<JumpOperator> out;
  for (const auto& c : lindblad_channels(p)) out.push_back({matrix(c.op), c.rate});
  return out;
}

struct SingleAtomSteadyState {
  double g = 1.0;
  double s = 0.0;
  double p = 0.0;
  cplx sg{};  // <sigma^sg>
  Eigen::Matrix3cd rho = Eigen::Matrix3cd::Zero();

  cplx expect(TransitionOp op) const { return expectation(rho, op); }
};

inline SingleAtomSteadyState single_atom_steady_state(const SystemParams& params) {
  const Eigen::MatrixXcd h = single_site_hamiltonian(params);
  const Eigen::MatrixXcd rho = steady_state(liouvillian(h, single_site_jumps(params)), 3);
  SingleAtomSteadyState out;
  out.rho = rho;
  out.g = rho(0, 0).real();
  out.s = rho(1, 1).real();
  out.p = rho(2, 2).real();
  out.sg = expectation(out.rho, ops::sg);
  return out;
}

/// Two atoms, basis |a>|b> with index 3a + b.
struct TwoAtomSteadyState {
  Eigen::MatrixXcd rho;  // 9x9

  /// <sigma^a_1 sigma^b_2>
  cplx expect(TransitionOp a, TransitionOp b) const {
    const Eigen::MatrixXcd op = detail::kron(matrix(a), matrix(b));
    return (rho * op).trace();
  }
  cplx expect_first(TransitionOp a) const { return expect(a, ops::gg) + expect(a, ops::ss) + expect(a, ops::pp); }
  cplx expect_second(TransitionOp b) const { return expect(ops::gg, b) + expect(ops::ss, b) + expect(ops::pp, b); }

  /// <sigma^pp_1 sigma^ss_2> - <sigma^pp_1><sigma^ss_2>
  double connected_pp_ss() const {
    return (expect(ops::pp, ops::ss) - expect_first(ops::pp) * expect_second(ops::ss)).real();
  }
};

inline Eigen::MatrixXcd two_atom_hamiltonian(const SystemParams& params, double v) {
  const Eigen::MatrixXcd h1 = single_site_hamiltonian(params);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(3, 3);
  Eigen::MatrixXcd h = detail::kron(h1, id) + detail::kron(id, h1);
  h += v * (detail::kron(matrix(ops::sp), matrix(ops::ps)) + detail::kron(matrix(ops::ps), matrix(ops::sp)));
  return h;
}

inline std::vector<JumpOperator> two_atom_jumps(const SystemParams& params) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(3, 3);
  std::vector<JumpOperator> out;
  for (const auto& j : single_site_jumps(params)) {
    out.push_back({detail::kron(j.op, id), j.rate});
    out.push_back({detail::kron(id, j.op), j.rate});
  }
  return out;
}

/// Exact stationary state of two atoms coupled by the flip-flop matrix element v.
inline TwoAtomSteadyState two_atom_steady_state(const SystemParams& params, double v) {
  if (!std::isfinite(v)) throw InvalidParameter("two-atom coupling must be finite");
  TwoAtomSteadyState out;
  out.rho = steady_state(liouvillian(two_atom_hamiltonian(params, v), two_atom_jumps(params)), 9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.rho);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw NonConvergenceError("two-atom steady state is not positive semidefinite");
  }
  return out;
}

}  // namespace rydberg
