#pragma once

// Monte Carlo wave-function trajectories for periodic rings of up to 10 atoms.
// Basis index k = sum_i digit_i 3^i with digits g = 0, s = 1, p = 2.

#include "rydberg/geometry.hpp"
#include "rydberg/levels.hpp"
#include "rydberg/parallel.hpp"
#include "rydberg/params.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydberg::trajectory {

inline constexpr int kMaxAtoms = 10;

using PureState = Eigen::VectorXcd;

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectorySettings {
  double dt = 0.002;
  double burn_in = 50.0;
  double sample_time = 4500.0;  // averaging window per trajectory
  double sample_interval = 0.5;
  int n_trajectories = 1;
  std::uint64_t seed = 1;
};

enum class Channel { decay_s, decay_p, decay_sp, dephase_s, dephase_p };

struct Jump {
  Channel channel;
  int site;
};

class RingSystem {
 public:
  RingSystem(const SystemParams& params, int n) : params_(params), n_(n) {
    params_.validate();
    if (n < 1 || n > kMaxAtoms) throw InvalidParameter("ring size must be in [1, 10]");
    dim_ = 1;
    for (int i = 0; i < n; ++i) {
      stride_.push_back(dim_);
      dim_ *= 3;
    }
    const double gs = params.gamma_s + params.gamma_r + params.gamma_d;
    const double gp = params.gamma_p + params.gamma_d;
    diag_.resize(dim_);
    digits_.resize(static_cast<std::size_t>(dim_) * n);
    for (Eigen::Index k = 0; k < dim_; ++k) {
      cplx d{};
      Eigen::Index r = k;
      for (int i = 0; i < n; ++i) {
        const int dig = static_cast<int>(r % 3);
        r /= 3;
        digits_[static_cast<std::size_t>(k) * n + i] = static_cast<std::uint8_t>(dig);
        if (dig == 1) d += -params.delta - 0.5 * I * gs;
        if (dig == 2) d += -0.5 * I * gp;
      }
      diag_(k) = d;
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = geometry::ring_interaction(params.c3, i, j, n);
        if (v != 0.0) bonds_.push_back({i, j, v});
      }
  }

  int size() const { return n_; }
  Eigen::Index dimension() const { return dim_; }
  const SystemParams& params() const { return params_; }
  int digit(Eigen::Index k, int site) const { return digits_[static_cast<std::size_t>(k) * n_ + site]; }

  /// Largest total jump rate over all basis states.
  double max_jump_rate() const {
    const double gs = params_.gamma_s + params_.gamma_r + params_.gamma_d;
    const double gp = params_.gamma_p + params_.gamma_d;
    return n_ * std::max(gs, gp);
  }

  /// Bound on the spectral radius of H_eff.
  double frequency_bound() const {
    double v = 0.0;
    for (const auto& b : bonds_) v += std::abs(b.v);
    return n_ * (std::abs(params_.delta) + 2.0 * params_.omega) + 2.0 * v + max_jump_rate();
  }

  PureState ground() const {
    PureState psi = PureState::Zero(dim_);
    psi(0) = 1.0;
    return psi;
  }

  /// out = H_eff psi with H_eff = H - (i/2) sum gamma O^dag O.
  void apply_heff(const PureState& psi, PureState& out) const {
    out = diag_.cwiseProduct(psi);
    const double om = params_.omega;
    for (Eigen::Index k = 0; k < dim_; ++k) {
      const cplx a = psi(k);
      if (a == cplx{}) continue;
      for (int i = 0; i < n_; ++i) {
        const int d = digit(k, i);
        if (om != 0.0) {
          if (d == 0) out(k + stride_[i]) += om * a;
          if (d == 1) out(k - stride_[i]) += om * a;
        }
      }
      for (const auto& b : bonds_) {
        const int di = digit(k, b.i), dj = digit(k, b.j);
        if (di == 1 && dj == 2) out(k + stride_[b.i] - stride_[b.j]) += b.v * a;
        if (di == 2 && dj == 1) out(k - stride_[b.i] + stride_[b.j]) += b.v * a;
      }
    }
  }

  double channel_rate(Channel c) const {
    switch (c) {
      case Channel::decay_s: return params_.gamma_s;
      case Channel::decay_p: return params_.gamma_p;
      case Channel::decay_sp: return params_.gamma_r;
      case Channel::dephase_s: return params_.gamma_d;
      case Channel::dephase_p: return params_.gamma_d;
    }
    return 0.0;
  }

  static int source_level(Channel c) {
    return (c == Channel::decay_p || c == Channel::dephase_p) ? 2 : 1;
  }
  static int target_level(Channel c) {
    switch (c) {
      case Channel::decay_s: return 0;
      case Channel::decay_p: return 0;
      case Channel::decay_sp: return 2;
      case Channel::dephase_s: return 1;
      case Channel::dephase_p: return 2;
    }
    return 0;
  }

  /// Population of `level` on every site: occ[i] = <psi| |level><level|_i |psi>.
  std::vector<double> site_occupation(const PureState& psi, int level) const {
    std::vector<double> occ(static_cast<std::size_t>(n_), 0.0);
    for (Eigen::Index k = 0; k < dim_; ++k) {
      const double w = std::norm(psi(k));
      if (w == 0.0) continue;
      for (int i = 0; i < n_; ++i)
        if (digit(k, i) == level) occ[static_cast<std::size_t>(i)] += w;
    }
    return occ;
  }

  /// O_c,i psi (unnormalized).
  PureState apply_jump(const PureState& psi, Jump j) const {
    PureState out = PureState::Zero(dim_);
    const int from = source_level(j.channel), to = target_level(j.channel);
    const Eigen::Index shift = (to - from) * stride_[j.site];
    for (Eigen::Index k = 0; k < dim_; ++k)
      if (digit(k, j.site) == from) out(k + shift) = psi(k);
    return out;
  }

  /// Expected p-number <N_p>.
  double p_number(const PureState& psi) const {
    double n = 0.0;
    for (double v : site_occupation(psi, 2)) n += v;
    return n;
  }

 private:
  struct Bond {
    int i, j;
    double v;
  };
  SystemParams params_;
  int n_;
  Eigen::Index dim_ = 1;
  std::vector<Eigen::Index> stride_;
  std::vector<std::uint8_t> digits_;
  PureState diag_;
  std::vector<Bond> bonds_;
};

inline constexpr std::array<Channel, 5> kChannels{Channel::decay_s, Channel::decay_p, Channel::decay_sp,
                                                   Channel::dephase_s, Channel::dephase_p};

inline void validate(const TrajectorySettings& s, const RingSystem& sys) {
  if (!(s.dt > 0.0)) throw InvalidParameter("trajectory dt must be > 0");
  if (!(s.dt * sys.max_jump_rate() < 0.1))
    throw InvalidParameter("trajectory dt too large: dt * max jump rate must be < 0.1");
  if (!(s.dt * sys.frequency_bound() < 1.0))
    throw InvalidParameter("trajectory dt too large for the effective Hamiltonian");
  if (s.burn_in < 0.0 || !(s.sample_time > 0.0) || !(s.sample_interval > 0.0))
    throw InvalidParameter("trajectory times must be positive");
  if (s.n_trajectories < 1) throw InvalidParameter("n_trajectories must be >= 1");
}

/// One trajectory: state, RNG substream, tracked p-number.
class Trajectory {
 public:
  Trajectory(const RingSystem& sys, std::uint64_t seed, std::uint64_t index)
      : sys_(sys), psi_(sys.ground()) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    rng_.seed(seq);
    const auto d = sys.dimension();
    k1_.resize(d);
    k2_.resize(d);
    k3_.resize(d);
    k4_.resize(d);
    tmp_.resize(d);
  }

  const PureState& state() const { return psi_; }
  int p_count() const { return p_count_; }

  /// Replace the state; it must have a definite number of p excitations.
  void reset(const PureState& psi) {
    if (psi.size() != sys_.dimension()) throw InvalidParameter("state dimension mismatch");
    psi_ = psi.normalized();
    const double np = sys_.p_number(psi_);
    p_count_ = static_cast<int>(std::lround(np));
    if (std::abs(np - p_count_) > 1e-9) throw InvalidParameter("state must have a definite p-number");
  }

  /// Advance by dt. Returns the jump taken, if any.
  std::optional<Jump> step(double dt) {
    // Non-unitary propagation d psi/dt = -i H_eff psi, RK4 on the unnormalized state.
    auto f = [&](const PureState& x, PureState& out) {
      sys_.apply_heff(x, out);
      out *= -I;
    };
    f(psi_, k1_);
    tmp_ = psi_ + 0.5 * dt * k1_;
    f(tmp_, k2_);
    tmp_ = psi_ + 0.5 * dt * k2_;
    f(tmp_, k3_);
    tmp_ = psi_ + dt * k3_;
    f(tmp_, k4_);
    tmp_ = psi_ + dt / 6.0 * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);

    const double p = 1.0 - tmp_.squaredNorm();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::optional<Jump> jumped;
    if (p > 0.0 && u(rng_) < p) {
      jumped = choose_jump(u(rng_));
      PureState next = sys_.apply_jump(psi_, *jumped);
      const double nrm = next.norm();
      if (!(nrm > 0.0)) throw TrajectoryError("selected jump annihilates the state");
      psi_ = next / nrm;
      const int delta = jumped->channel == Channel::decay_sp ? 1 : jumped->channel == Channel::decay_p ? -1 : 0;
      p_count_ += delta;
      if (std::abs(sys_.p_number(psi_) - p_count_) > 1e-9) throw TrajectoryError("p-number bookkeeping violated");
    } else {
      psi_ = tmp_ / std::sqrt(1.0 - p);
    }
    const double n2 = psi_.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-6) throw TrajectoryError("state norm drifted");
    return jumped;
  }

 private:
  const RingSystem& sys_;
  PureState psi_;
  std::mt19937_64 rng_;
  int p_count_ = 0;
  PureState k1_, k2_, k3_, k4_, tmp_;

  Jump choose_jump(double r) {
    const auto occ_s = sys_.site_occupation(psi_, 1);
    const auto occ_p = sys_.site_occupation(psi_, 2);
    std::vector<std::pair<Jump, double>> w;
    double total = 0.0;
    for (Channel c : kChannels) {
      const double rate = sys_.channel_rate(c);
      if (rate == 0.0) continue;
      const auto& occ = RingSystem::source_level(c) == 1 ? occ_s : occ_p;
      for (int i = 0; i < sys_.size(); ++i) {
        const double v = rate * occ[static_cast<std::size_t>(i)];
        if (v > 0.0) {
          w.push_back({{c, i}, v});
          total += v;
        }
      }
    }
    if (!(total > 0.0)) throw TrajectoryError("jump requested with zero total rate");
    double acc = 0.0;
    const double target = r * total;
    for (const auto& [j, v] : w) {
      acc += v;
      if (target < acc) return j;
    }
    return w.back().first;
  }
};

struct EstimatorResult {
  double mean = 0.0;
  double std_error = 0.0;
  int n_samples = 0;  // trajectories contributing
};

/// Per-trajectory time averages of the site-averaged observables.
struct TrajectoryAverages {
  double s = 0.0;
  double p = 0.0;
  std::vector<double> pp_ss;  // <sigma^pp_i sigma^ss_{i+d}>, d = 1..n/2
  std::vector<double> sp_ps;  // Re <sigma^sp_i sigma^ps_{i+d}>
  long jumps = 0;
};

inline TrajectoryAverages run_trajectory(const RingSystem& sys, const TrajectorySettings& s, std::uint64_t index,
                                         const std::function<void(double, const PureState&)>& observer = {}) {
  Trajectory traj(sys, s.seed, index);
  const int n = sys.size();
  const int nd = n / 2;
  TrajectoryAverages acc;
  acc.pp_ss.assign(static_cast<std::size_t>(nd), 0.0);
  acc.sp_ps.assign(static_cast<std::size_t>(nd), 0.0);

  const auto burn_steps = static_cast<long>(std::llround(s.burn_in / s.dt));
  const auto sample_every = std::max(1L, static_cast<long>(std::llround(s.sample_interval / s.dt)));
  const auto n_samples = std::max(1L, static_cast<long>(std::llround(s.sample_time / s.sample_interval)));
  const long total = burn_steps + n_samples * sample_every;
  long taken = 0;
  for (long step = 1; step <= total; ++step) {
    if (traj.step(s.dt)) ++acc.jumps;
    if (step <= burn_steps || (step - burn_steps) % sample_every != 0) continue;
    const PureState& psi = traj.state();
    if (observer) observer(step * s.dt, psi);
    ++taken;
    for (Eigen::Index k = 0; k < sys.dimension(); ++k) {
      const double w = std::norm(psi(k));
      if (w == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        const int di = sys.digit(k, i);
        if (di == 1) acc.s += w / n;
        if (di == 2) acc.p += w / n;
        if (di != 2) continue;
        for (int d = 1; d <= nd; ++d)
          if (sys.digit(k, (i + d) % n) == 1) acc.pp_ss[static_cast<std::size_t>(d - 1)] += w / n;
      }
    }
    // <sp_i ps_j>: amplitude transfer |p_i s_j> -> |s_i p_j>.
    for (Eigen::Index k = 0; k < sys.dimension(); ++k) {
      if (psi(k) == cplx{}) continue;
      Eigen::Index stride_i = 1;
      for (int i = 0; i < n; ++i, stride_i *= 3) {
        if (sys.digit(k, i) != 2) continue;
        for (int d = 1; d <= nd; ++d) {
          const int j = (i + d) % n;
          if (sys.digit(k, j) != 1) continue;
          Eigen::Index stride_j = 1;
          for (int q = 0; q < j; ++q) stride_j *= 3;
          const Eigen::Index k2 = k - stride_i + stride_j;
          acc.sp_ps[static_cast<std::size_t>(d - 1)] += (std::conj(psi(k2)) * psi(k)).real() / n;
        }
      }
    }
  }
  acc.s /= taken;
  acc.p /= taken;
  for (auto& v : acc.pp_ss) v /= taken;
  for (auto& v : acc.sp_ps) v /= taken;
  return acc;
}

inline EstimatorResult aggregate(const std::vector<double>& values) {
  EstimatorResult r;
  r.n_samples = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / r.n_samples;
  if (r.n_samples > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(ss / (r.n_samples - 1) / r.n_samples);
  }
  return r;
}

/// Mean and standard error across independent trajectories. Keys: "s", "p",
/// "pp_ss_d<k>", "sp_ps_d<k>".
inline std::map<std::string, EstimatorResult> estimate_steady(const SystemParams& params, int n,
                                                             const TrajectorySettings& settings, int workers = 1) {
  const RingSystem sys(params, n);
  validate(settings, sys);
  std::vector<TrajectoryAverages> runs(static_cast<std::size_t>(settings.n_trajectories));
  parallel_for(runs.size(), workers, [&](std::size_t i) { runs[i] = run_trajectory(sys, settings, i); });

  std::map<std::string, EstimatorResult> out;
  auto collect = [&](const std::string& key, auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    out[key] = aggregate(v);
  };
  collect("s", [](const TrajectoryAverages& r) { return r.s; });
  collect("p", [](const TrajectoryAverages& r) { return r.p; });
  for (int d = 1; d <= n / 2; ++d) {
    const auto i = static_cast<std::size_t>(d - 1);
    collect("pp_ss_d" + std::to_string(d), [i](const TrajectoryAverages& r) { return r.pp_ss[i]; });
    collect("sp_ps_d" + std::to_string(d), [i](const TrajectoryAverages& r) { return r.sp_ps[i]; });
  }
  return out;
}

}  // namespace rydberg::trajectory
