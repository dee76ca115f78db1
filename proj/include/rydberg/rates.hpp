#pragma once

// Inhomogeneous rate equations on a Gaussian cloud: each atom is pumped g -> s
// at a rate set by a local dephasing width that grows with nearby p population.

#include "rydberg/params.hpp"
#include "rydberg/parallel.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydberg::rates {

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AtomCloud {
  std::vector<std::array<double, 3>> positions;
  std::array<double, 3> sigma{};
  double n3d = 1.0;
  std::uint64_t seed = 0;
  std::size_t size() const { return positions.size(); }
};

/// Gaussian cloud whose peak density is n3d, widths in the ratio `aspect`.
inline AtomCloud sample_cloud(std::size_t n, double n3d, std::uint64_t seed,
                              std::array<double, 3> aspect = {2.0, 4.0, 5.0}) {
  if (n < 2) throw InvalidParameter("cloud needs at least two atoms");
  if (!(n3d > 0)) throw InvalidParameter("n3d must be > 0");
  for (double a : aspect)
    if (!(a > 0)) throw InvalidParameter("aspect entries must be > 0");
  const double vol = std::pow(2.0 * std::numbers::pi, 1.5) * aspect[0] * aspect[1] * aspect[2];
  const double k = std::cbrt(static_cast<double>(n) / (vol * n3d));
  AtomCloud cloud;
  cloud.n3d = n3d;
  cloud.seed = seed;
  for (int a = 0; a < 3; ++a) cloud.sigma[a] = k * aspect[a];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto draw = [&] {
    std::array<double, 3> r{};
    for (int a = 0; a < 3; ++a) r[a] = cloud.sigma[a] * gauss(rng);
    return r;
  };
  const double min_sep2 = std::pow(1e-3 * cloud.sigma[0], 2);
  cloud.positions.reserve(n);
  while (cloud.positions.size() < n) {
    const auto r = draw();
    bool ok = true;
    for (const auto& q : cloud.positions) {
      const double dx = r[0] - q[0], dy = r[1] - q[1], dz = r[2] - q[2];
      if (dx * dx + dy * dy + dz * dz < min_sep2) {
        ok = false;
        break;
      }
    }
    if (ok) cloud.positions.push_back(r);
  }
  return cloud;
}

/// (1 - 3 cos^2 theta)/r^3 with the quantization axis along z, zero diagonal.
inline Eigen::MatrixXd geometric_kernel(const AtomCloud& cloud) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = cloud.positions[static_cast<std::size_t>(i)];
      const auto& b = cloud.positions[static_cast<std::size_t>(j)];
      const double dx = b[0] - a[0], dy = b[1] - a[1], dz = b[2] - a[2];
      const double r2 = dx * dx + dy * dy + dz * dz;
      const double r = std::sqrt(r2);
      k(i, j) = k(j, i) = (1.0 - 3.0 * dz * dz / r2) / (r2 * r);
    }
  return k;
}

enum class Dephasing {
  signed_sum,    // |sum_j W_ij p_j|
  absolute_sum,  // sum_j |W_ij| p_j
  homogeneous,   // n3d C3 times the mean p
};

struct RateState {
  Eigen::VectorXd s, p;  // g = 1 - s - p
  static RateState ground(std::size_t n) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
  }
};

/// Kernel scaled by exactly one power of C3, in the form each dephasing mode needs.
struct Interactions {
  Eigen::MatrixXd w;
  Dephasing mode = Dephasing::signed_sum;
  double n3d_c3 = 0.0;

  Interactions(const AtomCloud& cloud, double c3, Dephasing m = Dephasing::signed_sum)
      : mode(m), n3d_c3(cloud.n3d * c3) {
    if (m != Dephasing::homogeneous) {
      w = c3 * geometric_kernel(cloud);
      if (m == Dephasing::absolute_sum) w = w.cwiseAbs();
    }
  }
};

inline Eigen::VectorXd dephasing_rates(const Eigen::VectorXd& p, const Interactions& in, const SystemParams& params) {
  const double base = params.gamma_s + params.gamma_r;
  switch (in.mode) {
    case Dephasing::homogeneous:
      return Eigen::VectorXd::Constant(p.size(), base + in.n3d_c3 * p.mean());
    case Dephasing::signed_sum:
    case Dephasing::absolute_sum:
      break;
  }
  return (in.w * p).cwiseAbs().array() + base;
}

/// Omega^2 Gamma / (delta^2 + Gamma^2/4).
inline double pumping_rate(double gamma, const SystemParams& p) {
  if (!(gamma > 0)) throw InvalidParameter("dephasing rate must be > 0");
  return p.omega * p.omega * gamma / (p.delta * p.delta + 0.25 * gamma * gamma);
}

inline Eigen::VectorXd pumping_rates(const Eigen::VectorXd& gamma, const SystemParams& p) {
  return gamma.unaryExpr([&](double g) { return pumping_rate(g, p); });
}

/// Non-interacting fixed point: s = R / ((gs + gR) + R (2 + gR/gp)).
inline double free_steady_s(const SystemParams& p) {
  const double r = pumping_rate(p.gamma_s + p.gamma_r, p);
  return r / ((p.gamma_s + p.gamma_r) + r * (2.0 + p.gamma_r / p.gamma_p));
}

struct RateSettings {
  double dt = 0.02;
  double t_max = 200.0;
  double average_fraction = 0.5;  // trailing window used for the time average
  double sample_interval = 0.1;
};

struct RateRun {
  RateState final;
  std::vector<double> t, mean_s, mean_p;
  double time_average_s = 0.0;
  double oscillation_amplitude = 0.0;  // max - min of mean s over the window
  int halvings = 0;
};

inline void derivative(const RateState& y, const Interactions& in, const SystemParams& p, RateState& dy) {
  const Eigen::VectorXd r = pumping_rates(dephasing_rates(y.p, in, p), p);
  const Eigen::ArrayXd g = 1.0 - y.s.array() - y.p.array();
  dy.s = (r.array() * (g - y.s.array()) - (p.gamma_s + p.gamma_r) * y.s.array()).matrix();
  dy.p = (p.gamma_r * y.s.array() - p.gamma_p * y.p.array()).matrix();
}

/// Classic RK4 with the dephasing widths rebuilt at every stage. A step that
/// leaves [0, 1] is retried at half the step size.
inline RateRun integrate(const Interactions& in, const SystemParams& params, const RateSettings& settings,
                         RateState y) {
  params.validate();
  if (!(settings.dt > 0) || !(settings.t_max > 0)) throw InvalidParameter("dt and t_max must be > 0");
  RateState k1, k2, k3, k4, tmp;
  RateRun run;
  double t = 0.0, next_sample = 0.0;
  const double window_start = settings.t_max * (1.0 - settings.average_fraction);
  double acc = 0.0, acc_time = 0.0, lo = 1.0, hi = 0.0;

  auto in_range = [](const RateState& s) {
    const Eigen::ArrayXd g = 1.0 - s.s.array() - s.p.array();
    return s.s.allFinite() && s.p.allFinite() && s.s.minCoeff() >= -1e-12 && s.p.minCoeff() >= -1e-12 &&
           g.minCoeff() >= -1e-12;
  };

  while (t < settings.t_max - 1e-12) {
    if (t >= next_sample - 1e-12) {
      run.t.push_back(t);
      run.mean_s.push_back(y.s.mean());
      run.mean_p.push_back(y.p.mean());
      next_sample += settings.sample_interval;
    }
    double h = std::min(settings.dt, settings.t_max - t);
    RateState next;
    for (int attempt = 0;; ++attempt) {
      derivative(y, in, params, k1);
      tmp = {y.s + 0.5 * h * k1.s, y.p + 0.5 * h * k1.p};
      derivative(tmp, in, params, k2);
      tmp = {y.s + 0.5 * h * k2.s, y.p + 0.5 * h * k2.p};
      derivative(tmp, in, params, k3);
      tmp = {y.s + h * k3.s, y.p + h * k3.p};
      derivative(tmp, in, params, k4);
      next = {y.s + h / 6.0 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s), y.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p)};
      if (in_range(next)) break;
      if (!next.s.allFinite() || !next.p.allFinite() || attempt >= 30)
        throw IntegrationError("rate integration failed at t=" + std::to_string(t));
      h *= 0.5;
      ++run.halvings;
    }
    if (t + h > window_start) {
      const double span = t + h - std::max(t, window_start);
      const double avg = 0.5 * (y.s.mean() + next.s.mean());
      acc += span * avg;
      acc_time += span;
      lo = std::min(lo, next.s.mean());
      hi = std::max(hi, next.s.mean());
    }
    y = std::move(next);
    t += h;
  }
  run.t.push_back(t);
  run.mean_s.push_back(y.s.mean());
  run.mean_p.push_back(y.p.mean());
  run.time_average_s = acc_time > 0 ? acc / acc_time : y.s.mean();
  run.oscillation_amplitude = hi >= lo ? hi - lo : 0.0;
  run.final = std::move(y);
  return run;
}

struct LineshapePoint {
  double delta;
  double mean;
  double stddev;
};

/// Time-averaged s population per detuning, mean and sample standard
/// deviation over the clouds.
inline std::vector<LineshapePoint> lineshape_scan(const std::vector<Interactions>& clouds, SystemParams params,
                                                  const std::vector<double>& deltas, const RateSettings& settings,
                                                  int workers = default_workers()) {
  if (clouds.size() < 2) throw InvalidParameter("lineshape scan needs at least two clouds");
  const std::size_t nd = deltas.size(), nc = clouds.size();
  std::vector<double> value(nd * nc);
  parallel_for(nd * nc, workers, [&](std::size_t k) {
    SystemParams p = params;
    p.delta = deltas[k / nc];
    const auto& in = clouds[k % nc];
    const std::size_t n = in.mode == Dephasing::homogeneous ? 1 : static_cast<std::size_t>(in.w.rows());
    value[k] = integrate(in, p, settings, RateState::ground(n)).time_average_s;
  });
  std::vector<LineshapePoint> out;
  for (std::size_t d = 0; d < nd; ++d) {
    double m = 0.0;
    for (std::size_t c = 0; c < nc; ++c) m += value[d * nc + c];
    m /= static_cast<double>(nc);
    double v = 0.0;
    for (std::size_t c = 0; c < nc; ++c) v += std::pow(value[d * nc + c] - m, 2);
    out.push_back({deltas[d], m, std::sqrt(v / static_cast<double>(nc - 1))});
  }
  return out;
}

}  // namespace rydberg::rates
