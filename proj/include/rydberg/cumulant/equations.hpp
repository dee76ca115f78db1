#pragma once

// Second-order cumulant equations of motion for a translationally invariant
// lattice. The state holds the nine single-site expectations s[a] = <sigma^a>
// and, for every displacement orbit o, the 9x9 block P_o[a][b] =
// <sigma^a_0 sigma^b_d> (d the orbit representative). Charged entries are kept
// at zero and skipped unless the full operator set is requested.

#include "rydberg/cumulant/lattice.hpp"
#include "rydberg/levels.hpp"
#include "rydberg/model.hpp"
#include "rydberg/params.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rydberg::cumulant {

inline constexpr int kOps = 9;
inline constexpr int kPairOps = 81;

struct EquationOptions {
  /// Evolve only total-charge-0 expectations (charged ones are identically zero).
  bool charge_sector_only = true;
  /// Check d/dt(gg + ss + pp) = 0 on every evaluation.
  bool check_population_sum = true;
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat state: 9 singles followed by 81 entries per orbit (row a, column b).
class CumulantState {
 public:
  CumulantState() = default;
  explicit CumulantState(std::size_t n_orbits) : data_(kOps + kPairOps * n_orbits, cplx{}) {}

  std::size_t n_orbits() const { return (data_.size() - kOps) / kPairOps; }
  std::size_t size() const { return data_.size(); }

  cplx* singles() { return data_.data(); }
  const cplx* singles() const { return data_.data(); }
  cplx* pair(std::size_t o) { return data_.data() + kOps + kPairOps * o; }
  const cplx* pair(std::size_t o) const { return data_.data() + kOps + kPairOps * o; }

  cplx single(TransitionOp a) const { return data_[static_cast<std::size_t>(a.index())]; }
  cplx pair(std::size_t o, TransitionOp a, TransitionOp b) const { return pair(o)[a.index() * kOps + b.index()]; }

  std::vector<cplx>& raw() { return data_; }
  const std::vector<cplx>& raw() const { return data_; }

  double population(Level l) const {
    const TransitionOp op{l, l};
    return single(op).real();
  }

 private:
  std::vector<cplx> data_;
};

/// Coefficients x of sigma^x in the 3x3 operator m (m = sum_x c_x sigma^x).
inline std::array<cplx, kOps> decompose(const Eigen::Matrix3cd& m) {
  std::array<cplx, kOps> out{};
  for (int x = 0; x < kOps; ++x) {
    const auto op = TransitionOp::from_index(x);
    out[static_cast<std::size_t>(x)] = m(static_cast<int>(op.to), static_cast<int>(op.from));
  }
  return out;
}

/// Adjoint generator on single-site operators: d<sigma^a>/dt = sum_x G(a, x) <sigma^x>.
inline Eigen::Matrix<cplx, kOps, kOps> single_site_generator(const SystemParams& p) {
  const Eigen::Matrix3cd h = single_site_hamiltonian(p);
  const auto channels = lindblad_channels(p);
  Eigen::Matrix<cplx, kOps, kOps> g;
  for (int a = 0; a < kOps; ++a) {
    const Eigen::Matrix3cd o = matrix(TransitionOp::from_index(a));
    Eigen::Matrix3cd out = I * (h * o - o * h);
    for (const auto& c : channels) {
      if (c.rate == 0.0) continue;
      const Eigen::Matrix3cd l = matrix(c.op);
      const Eigen::Matrix3cd ldl = l.adjoint() * l;
      out += c.rate * (l.adjoint() * o * l - 0.5 * (ldl * o + o * ldl));
    }
    const auto coeffs = decompose(out);
    for (int x = 0; x < kOps; ++x) g(a, x) = coeffs[static_cast<std::size_t>(x)];
  }
  return g;
}

class Equations {
 public:
  using Term = std::pair<int, cplx>;  // (source index, coefficient)

  Equations(const SystemParams& params, PairLattice lattice, EquationOptions options = {})
      : params_(params), lattice_(std::move(lattice)), options_(options) {
    params_.validate();
    if (lattice_.c3 != params_.c3) throw InvalidParameter("lattice c3 does not match params c3");
    build_tables();
  }

  const SystemParams& params() const { return params_; }
  const PairLattice& lattice() const { return lattice_; }
  const EquationOptions& options() const { return options_; }
  std::size_t n_orbits() const { return lattice_.size(); }

  /// Frequency scale that bounds the explicit step: largest rate plus largest |V|.
  double max_frequency() const { return params_.largest_rate() + lattice_.max_abs_coupling; }

  const Eigen::Matrix<cplx, kOps, kOps>& generator() const { return generator_; }

  /// Coefficient of <sigma^x> in i[X_c, sigma^a] (c = 0: X = sigma^sp, c = 1: X = sigma^ps).
  const std::vector<Term>& commutator_terms(int c, int a) const { return commutator_[c][a]; }

  /// Terms of i[V(sp x ps + ps x sp), sigma^a x sigma^b] per unit V, indexed by 9a + b.
  const std::vector<Term>& exchange_terms(int k) const { return exchange_[k]; }

  /// Coefficient of the pair source (9a' + b') in d P[a][b]/dt from the exchange term, per unit V.
  cplx exchange_coefficient(TransitionOp a, TransitionOp b, TransitionOp a2, TransitionOp b2) const {
    const int src = a2.index() * kOps + b2.index();
    for (const auto& [k, c] : exchange_[a.index() * kOps + b.index()])
      if (k == src) return c;
    return {};
  }

  const std::vector<int>& active_singles() const { return active_singles_; }
  const std::vector<int>& active_pairs() const { return active_pairs_; }

  /// All atoms in g, no correlations.
  CumulantState ground_state() const {
    Eigen::Matrix3cd rho = Eigen::Matrix3cd::Zero();
    rho(0, 0) = 1.0;
    return product_state(rho);
  }

  /// Uncorrelated product state with the given single-site density matrix.
  CumulantState product_state(const Eigen::Matrix3cd& rho) const {
    CumulantState st(n_orbits());
    cplx* s = st.singles();
    for (int a = 0; a < kOps; ++a) s[a] = expectation(rho, TransitionOp::from_index(a));
    for (std::size_t o = 0; o < n_orbits(); ++o) {
      cplx* p = st.pair(o);
      for (int a = 0; a < kOps; ++a)
        for (int b = 0; b < kOps; ++b) p[a * kOps + b] = s[a] * s[b];
    }
    return st;
  }

  /// Time derivative of every stored expectation.
  void rhs(const CumulantState& y, CumulantState& dy) const {
    const std::size_t n = n_orbits();
    if (dy.size() != y.size()) dy = CumulantState(n);
    const cplx* s = y.singles();
    cplx* ds = dy.singles();

    // Interaction fields F_c[x] = sum_j V(j) <sigma^x_0 Y_c,j>.
    std::array<std::array<cplx, kOps>, 2> field{};
    for (std::size_t o = 0; o < n; ++o) {
      const auto& orb = lattice_.orbits[o];
      const double w = orb.coupling * orb.multiplicity();
      if (w == 0.0) continue;
      const cplx* p = y.pair(o);
      for (int c = 0; c < 2; ++c)
        for (int x : field_rows_[c]) field[c][x] += w * p[x * kOps + kRemote[c]];
    }

    // Third-site sums Conv_c[u](o) = sum_{e in R, d+e != 0} V(e) <sigma^u_0 Y_c,d+e>,
    // with pairs outside the region replaced by their product.
    const auto nf = static_cast<Eigen::Index>(conv_columns_.size());
    Eigen::MatrixXd pair_field(static_cast<Eigen::Index>(n), 2 * nf);
    for (std::size_t o = 0; o < n; ++o) {
      const cplx* p = y.pair(o);
      for (Eigen::Index col = 0; col < nf; ++col) {
        const auto [c, u] = conv_columns_[static_cast<std::size_t>(col)];
        const cplx v = p[u * kOps + kRemote[c]];
        pair_field(static_cast<Eigen::Index>(o), 2 * col) = v.real();
        pair_field(static_cast<Eigen::Index>(o), 2 * col + 1) = v.imag();
      }
    }
    Eigen::MatrixXd conv = lattice_.neighbor_weights * pair_field;
    for (Eigen::Index col = 0; col < nf; ++col) {
      const auto [c, u] = conv_columns_[static_cast<std::size_t>(col)];
      const cplx outside = s[u] * s[kRemote[c]];
      if (outside == cplx{}) continue;
      for (std::size_t o = 0; o < n; ++o) {
        const double w = lattice_.outside_weights(static_cast<Eigen::Index>(o));
        conv(static_cast<Eigen::Index>(o), 2 * col) += w * outside.real();
        conv(static_cast<Eigen::Index>(o), 2 * col + 1) += w * outside.imag();
      }
    }

    // Singles.
    for (int a : active_singles_) {
      cplx v{};
      for (const auto& [x, g] : generator_rows_[a]) v += g * s[x];
      for (int c = 0; c < 2; ++c)
        for (const auto& [x, k] : commutator_[c][a]) v += k * field[c][x];
      ds[a] = v;
    }
    if (options_.check_population_sum) {
      const cplx sum = ds[0] + ds[4] + ds[8];
      const double scale = std::max(1.0, std::abs(ds[0]) + std::abs(ds[4]) + std::abs(ds[8]));
      if (!(std::abs(sum) <= 1e-12 * scale)) {
        throw InvariantViolation("population derivative sum " + std::to_string(std::abs(sum)));
      }
    }

    const double vsum = lattice_.coupling_sum;
    const bool charged_singles = s[kRemote[0]] != cplx{} || s[kRemote[1]] != cplx{};

    // Pairs.
    std::array<cplx, kOps> conv0{}, conv1{};
    for (std::size_t o = 0; o < n; ++o) {
      const double v = lattice_.orbits[o].coupling;
      const double vrest = vsum - v;
      const cplx* p = y.pair(o);
      cplx* dp = dy.pair(o);

      conv0.fill(cplx{});
      conv1.fill(cplx{});
      for (Eigen::Index col = 0; col < nf; ++col) {
        const auto [c, u] = conv_columns_[static_cast<std::size_t>(col)];
        const cplx val{conv(static_cast<Eigen::Index>(o), 2 * col), conv(static_cast<Eigen::Index>(o), 2 * col + 1)};
        (c == 0 ? conv0 : conv1)[u] = val;
      }
      const std::array<const std::array<cplx, kOps>*, 2> conv_by_channel{&conv0, &conv1};

      // Three-site term for an operator on one side: sum over the remote
      // site j of V <sigma^x (this side) sigma^w (other side) Y_c,j>, factorized.
      // `fwd` selects P[x][w] (site 0) or P[w][x] (site d).
      auto three_site = [&](int c, int x, int w, bool fwd) {
        const int yr = kRemote[c];
        const cplx own = fwd ? p[x * kOps + yr] : p[yr * kOps + x];
        cplx t = (field[c][x] - v * own) * s[w] + (*conv_by_channel[c])[w] * s[x];
        if (charged_singles) {
          const cplx pxw = fwd ? p[x * kOps + w] : p[w * kOps + x];
          t += vrest * (pxw * s[yr] - 2.0 * s[x] * s[w] * s[yr]);
        }
        return t;
      };

      for (std::size_t i = 0; i < active_pairs_.size(); ++i) {
        const int k = active_pairs_[i];
        const int partner = pair_partner_[k];
        if (partner < k) continue;  // filled by conjugation below
        const int a = k / kOps, b = k % kOps;
        cplx val{};
        for (const auto& [x, g] : generator_rows_[a]) val += g * p[x * kOps + b];
        for (const auto& [x, g] : generator_rows_[b]) val += g * p[a * kOps + x];
        if (v != 0.0)
          for (const auto& [src, e] : exchange_[k]) val += v * e * p[src];
        for (int c = 0; c < 2; ++c) {
          for (const auto& [x, coef] : commutator_[c][a]) val += coef * three_site(c, x, b, true);
          for (const auto& [x, coef] : commutator_[c][b]) val += coef * three_site(c, x, a, false);
        }
        dp[k] = val;
        if (partner != k) dp[partner] = std::conj(val);
      }
    }
  }

 private:
  // Remote operator Y_c: c = 0 pairs local sigma^sp with remote sigma^ps, c = 1 the reverse.
  static constexpr std::array<int, 2> kRemote{ops::ps.index(), ops::sp.index()};
  static constexpr std::array<int, 2> kLocal{ops::sp.index(), ops::ps.index()};

  SystemParams params_;
  PairLattice lattice_;
  EquationOptions options_;

  Eigen::Matrix<cplx, kOps, kOps> generator_;
  std::array<std::vector<Term>, kOps> generator_rows_;
  std::array<std::array<std::vector<Term>, kOps>, 2> commutator_;
  std::array<std::vector<Term>, kPairOps> exchange_;
  std::array<int, kPairOps> pair_partner_{};
  std::vector<int> active_singles_;
  std::vector<int> active_pairs_;
  std::array<std::vector<int>, 2> field_rows_;
  std::vector<std::pair<int, int>> conv_columns_;  // (channel, u)

  bool active(int a) const {
    return !options_.charge_sector_only || u1_charge(TransitionOp::from_index(a)) == 0;
  }
  bool active(int a, int b) const {
    return !options_.charge_sector_only ||
           u1_charge(TransitionOp::from_index(a), TransitionOp::from_index(b)) == 0;
  }

  static int adjoint_index(int a) { return TransitionOp::from_index(a).adjoint().index(); }

  void build_tables() {
    generator_ = single_site_generator(params_);
    for (int a = 0; a < kOps; ++a)
      for (int x = 0; x < kOps; ++x)
        if (generator_(a, x) != cplx{}) generator_rows_[a].push_back({x, generator_(a, x)});

    for (int c = 0; c < 2; ++c) {
      const Eigen::Matrix3cd xm = matrix(TransitionOp::from_index(kLocal[c]));
      for (int a = 0; a < kOps; ++a) {
        const Eigen::Matrix3cd am = matrix(TransitionOp::from_index(a));
        const auto coeffs = decompose(I * (xm * am - am * xm));
        for (int x = 0; x < kOps; ++x)
          if (coeffs[x] != cplx{}) commutator_[c][a].push_back({x, coeffs[x]});
      }
    }

    // i[X (x) Y, A (x) B] = i(XA (x) YB - AX (x) BY), summed over both channels.
    for (int a = 0; a < kOps; ++a)
      for (int b = 0; b < kOps; ++b) {
        std::array<cplx, kPairOps> acc{};
        const auto A = TransitionOp::from_index(a), B = TransitionOp::from_index(b);
        for (int c = 0; c < 2; ++c) {
          const auto X = TransitionOp::from_index(kLocal[c]), Y = TransitionOp::from_index(kRemote[c]);
          TransitionOp l{}, r{};
          if (multiply(X, A, l) && multiply(Y, B, r)) acc[l.index() * kOps + r.index()] += I;
          if (multiply(A, X, l) && multiply(B, Y, r)) acc[l.index() * kOps + r.index()] -= I;
        }
        for (int k = 0; k < kPairOps; ++k)
          if (acc[k] != cplx{}) exchange_[a * kOps + b].push_back({k, acc[k]});
      }

    for (int a = 0; a < kOps; ++a)
      if (active(a)) active_singles_.push_back(a);
    for (int a = 0; a < kOps; ++a)
      for (int b = 0; b < kOps; ++b) {
        pair_partner_[a * kOps + b] = adjoint_index(a) * kOps + adjoint_index(b);
        if (active(a, b)) active_pairs_.push_back(a * kOps + b);
      }

    // Rows x of P[x][Y_c] that feed the fields: any x reached from an active operator.
    for (int c = 0; c < 2; ++c) {
      std::array<bool, kOps> need{};
      for (int a = 0; a < kOps; ++a)
        for (const auto& [x, coef] : commutator_[c][a]) need[x] = true;
      for (int x = 0; x < kOps; ++x)
        if (need[x] && active(x, kRemote[c])) field_rows_[c].push_back(x);
      for (int u = 0; u < kOps; ++u)
        if (active(u, kRemote[c])) conv_columns_.push_back({c, u});
    }
  }
};

}  // namespace rydberg::cumulant
