#pragma once

#include "rydberg/levels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydberg {

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Physical rates and couplings, all in units of gamma_s (lattice spacing = 1).
struct SystemParams {
  double omega = 0.0;     // Rabi frequency (half the usual convention)
  double delta = 0.0;     // detuning
  double gamma_s = 1.0;   // s -> g
  double gamma_p = 1.0;   // p -> g
  double gamma_r = 0.3;   // s -> p
  double gamma_d = 0.0;   // dephasing on s and on p
  double c3 = 0.0;        // dipole coefficient

  void validate() const {
    auto finite = [](double v, const char* name) {
      if (!std::isfinite(v)) throw InvalidParameter(std::string(name) + " must be finite");
    };
    finite(omega, "omega");
    finite(delta, "delta");
    finite(gamma_s, "gamma_s");
    finite(gamma_p, "gamma_p");
    finite(gamma_r, "gamma_r");
    finite(gamma_d, "gamma_d");
    finite(c3, "c3");
    if (omega < 0) throw InvalidParameter("omega must be >= 0");
    if (gamma_s <= 0) throw InvalidParameter("gamma_s must be > 0");
    if (gamma_p <= 0) throw InvalidParameter("gamma_p must be > 0");
    if (gamma_r < 0) throw InvalidParameter("gamma_r must be >= 0");
    if (gamma_d < 0) throw InvalidParameter("gamma_d must be >= 0");
  }

  /// Largest single-atom frequency scale (rates, drive, detuning).
  double largest_rate() const {
    double m = std::abs(delta);
    for (double v : {omega, gamma_s, gamma_p, gamma_r, gamma_d}) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// One dissipative channel: jump operator with its rate.
struct LindbladChannel {
  enum class Kind { decay_s, decay_p, decay_sp, dephase_s, dephase_p };
  Kind kind;
  TransitionOp op;
  double rate;
};

/// Channel catalog: s->g, p->g, s->p decay and equal dephasing on s and p.
inline std::vector<LindbladChannel> lindblad_channels(const SystemParams& p) {
  using K = LindbladChannel::Kind;
  return {
      {K::decay_s, ops::gs, p.gamma_s},
      {K::decay_p, ops::gp, p.gamma_p},
      {K::decay_sp, ops::ps, p.gamma_r},
      {K::dephase_s, ops::ss, p.gamma_d},
      {K::dephase_p, ops::pp, p.gamma_d},
  };
}

/// Single-site Hamiltonian -delta sigma^ss + omega (sigma^gs + sigma^sg).
inline Eigen::Matrix3cd single_site_hamiltonian(const SystemParams& p) {
  return -p.delta * matrix(ops::ss) + p.omega * (matrix(ops::gs) + matrix(ops::sg));
}

}  // namespace rydberg
