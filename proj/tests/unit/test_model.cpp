#include "rydberg/model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rydberg;

TEST(Levels, ChargeOfOperators) {
  EXPECT_EQ(u1_charge(ops::ss), 0);
  EXPECT_EQ(u1_charge(ops::ps), 1);
  EXPECT_EQ(u1_charge(ops::sp), -1);
  EXPECT_EQ(u1_charge(ops::pp), 0);
  EXPECT_EQ(u1_charge(ops::sp, ops::ps), 0);
}

TEST(Levels, IndexRoundTripAndAdjoint) {
  for (int k = 0; k < 9; ++k) {
    const auto op = TransitionOp::from_index(k);
    EXPECT_EQ(op.index(), k);
    EXPECT_EQ(op.adjoint().adjoint(), op);
    EXPECT_EQ(u1_charge(op.adjoint()), -u1_charge(op));
  }
  EXPECT_EQ(ops::sg.name(), "sigma^sg");
}

TEST(Params, DefaultsAndValidation) {
  SystemParams p;
  EXPECT_EQ(p.gamma_s, 1.0);
  EXPECT_EQ(p.gamma_p, 1.0);
  EXPECT_EQ(p.gamma_r, 0.3);
  p.validate();
  p.gamma_s = 0.0;
  EXPECT_THROW(p.validate(), InvalidParameter);
  p.gamma_s = 1.0;
  p.omega = std::numeric_limits<double>::infinity();
  EXPECT_THROW(p.validate(), InvalidParameter);
}

TEST(Params, ChannelCatalog) {
  SystemParams p;
  p.gamma_d = 0.2;
  const auto c = lindblad_channels(p);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].op, ops::gs);
  EXPECT_EQ(c[1].op, ops::gp);
  EXPECT_EQ(c[2].op, ops::ps);
  EXPECT_EQ(c[3].op, ops::ss);
  EXPECT_EQ(c[4].op, ops::pp);
  EXPECT_EQ(c[2].rate, 0.3);
  EXPECT_EQ(c[4].rate, 0.2);
}

TEST(SingleAtom, NoDriveIsGround) {
  SystemParams p;
  const auto r = single_atom_steady_state(p);
  EXPECT_NEAR(r.g, 1.0, 1e-14);
  EXPECT_NEAR(r.s, 0.0, 1e-14);
  EXPECT_NEAR(r.p, 0.0, 1e-14);
}

TEST(SingleAtom, PerturbativePopulation) {
  SystemParams p;
  p.omega = 0.05;
  const auto r = single_atom_steady_state(p);
  const double pert = 4 * 0.05 * 0.05 / (1.3 * 1.3);
  EXPECT_NEAR(pert, 0.00592, 1e-5);
  // Agreement to O(Omega^4): relative deviation of order Omega^2.
  EXPECT_NEAR(r.s, pert, 0.05 * pert);
  EXPECT_NEAR(r.g + r.s + r.p, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.expect(ops::sp)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(r.expect(ops::pg)), 0.0, 1e-12);
}

TEST(SingleAtom, SaturationMonotone) {
  SystemParams p;
  double prev = 0.0;
  for (double om : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    p.omega = om;
    const auto r = single_atom_steady_state(p);
    EXPECT_GT(r.s, prev);
    EXPECT_GE(r.s, 0.0);
    EXPECT_LE(r.s, 1.0);
    prev = r.s;
  }
}

TEST(SingleAtom, MatchesTimeIntegration) {
  SystemParams p;
  p.omega = 0.4;
  p.delta = 0.3;
  p.gamma_d = 0.1;
  const Eigen::MatrixXcd h = single_site_hamiltonian(p);
  const auto jumps = single_site_jumps(p);
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(3, 3);
  rho(0, 0) = 1.0;
  const double dt = 0.005;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::MatrixXcd k1 = lindblad_rhs(h, jumps, rho);
    const Eigen::MatrixXcd k2 = lindblad_rhs(h, jumps, rho + 0.5 * dt * k1);
    const Eigen::MatrixXcd k3 = lindblad_rhs(h, jumps, rho + 0.5 * dt * k2);
    const Eigen::MatrixXcd k4 = lindblad_rhs(h, jumps, rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const auto r = single_atom_steady_state(p);
  EXPECT_LT((rho - r.rho).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SingleAtom, SingularWithoutDissipation) {
  // Closed three-level system: steady state not unique.
  const Eigen::MatrixXcd l = liouvillian(Eigen::MatrixXcd::Zero(3, 3), {});
  EXPECT_THROW(steady_state(l, 3), SingularSystemError);
}

TEST(Liouvillian, TraceAndHermiticityPreserved) {
  SystemParams p;
  p.omega = 0.7;
  p.delta = -0.4;
  p.gamma_d = 0.3;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const Eigen::MatrixXcd h = two_atom_hamiltonian(p, 1.7);
  const auto jumps = two_atom_jumps(p);
  Eigen::MatrixXcd m(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) m(i, j) = {n(rng), n(rng)};
  const Eigen::MatrixXcd herm = m + m.adjoint();
  const Eigen::MatrixXcd d = lindblad_rhs(h, jumps, herm);
  EXPECT_LT(std::abs(d.trace()), 1e-12);
  EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  // Superoperator and direct action agree.
  const Eigen::MatrixXcd l = liouvillian(h, jumps);
  const Eigen::VectorXcd v = l * Eigen::Map<const Eigen::VectorXcd>(herm.data(), 81);
  EXPECT_LT((Eigen::Map<const Eigen::MatrixXcd>(v.data(), 9, 9) - d).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TwoAtom, UncoupledIsProduct) {
  SystemParams p;
  p.omega = 0.4;
  p.delta = 0.2;
  const auto one = single_atom_steady_state(p);
  const auto two = two_atom_steady_state(p, 0.0);
  Eigen::MatrixXcd prod = detail::kron(one.rho, one.rho);
  EXPECT_LT((two.rho - prod).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(two.connected_pp_ss(), 0.0, 1e-12);
}

TEST(TwoAtom, TraceHermitianPsd) {
  SystemParams p;
  p.omega = 0.8;
  const auto two = two_atom_steady_state(p, 3.0);
  EXPECT_NEAR(two.rho.trace().real(), 1.0, 1e-12);
  EXPECT_LT((two.rho - two.rho.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(two.rho);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
  // Charged expectations vanish.
  EXPECT_LT(std::abs(two.expect(ops::sp, ops::gg)), 1e-9);
  EXPECT_LT(std::abs(two.expect(ops::sp, ops::sp)), 1e-9);
}

TEST(TwoAtom, StrongCouplingCorrelationSaturates) {
  SystemParams p;
  p.omega = 0.4;
  double prev = 0.0;
  for (double v : {10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1000.0}) {
    const double c = two_atom_steady_state(p, v).connected_pp_ss();
    EXPECT_LT(c, 0.0);
    if (prev != 0.0) EXPECT_LT(std::abs(c - prev) / std::abs(prev), 0.05) << "v = " << v;
    prev = c;
  }
}
