#pragma once

// Curve fits and feature extraction on solver output.

#include "rydberg/params.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rydberg::analysis {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- Lorentzian

struct LorentzianFit {
  double amplitude = 0.0;
  double center = 0.0;
  double fwhm = 0.0;
  double offset = 0.0;
  Eigen::MatrixXd covariance;  // order: amplitude, center, fwhm[, offset]
  double residual_norm = 0.0;  // unweighted L2 norm of y - model
  int iterations = 0;
  bool converged = false;

  double operator()(double x) const {
    const double u = (x - center) / (0.5 * fwhm);
    return amplitude / (1.0 + u * u) + offset;
  }
  double error(int k) const { return std::sqrt(std::max(0.0, covariance(k, k))); }
};

namespace detail {

struct LorentzFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& x;
  const std::vector<double>& y;
  std::vector<double> w;
  bool with_offset;

  LorentzFunctor(const std::vector<double>& xs, const std::vector<double>& ys, std::vector<double> weights, bool off)
      : Eigen::DenseFunctor<double>(off ? 4 : 3, static_cast<int>(xs.size())), x(xs), y(ys), w(std::move(weights)),
        with_offset(off) {}

  int operator()(const InputType& p, ValueType& f) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = (x[i] - p(1)) / (0.5 * p(2));
      const double m = p(0) / (1.0 + u * u) + (with_offset ? p(3) : 0.0);
      f(static_cast<Eigen::Index>(i)) = w[i] * (m - y[i]);
    }
    return 0;
  }
  int df(const InputType& p, JacobianType& j) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double hw = 0.5 * p(2);
      const double u = (x[i] - p(1)) / hw;
      const double den = 1.0 + u * u;
      j(r, 0) = w[i] / den;
      const double dm_du = -2.0 * p(0) * u / (den * den);
      j(r, 1) = w[i] * dm_du * (-1.0 / hw);
      j(r, 2) = w[i] * dm_du * (-u / p(2));
      if (with_offset) j(r, 3) = w[i];
    }
    return 0;
  }
};

}  // namespace detail

/// Damped least squares on A / (1 + ((x - x0)/(w/2))^2) [+ c].
inline LorentzianFit fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y,
                                    const std::optional<std::vector<double>>& y_err = std::nullopt,
                                    bool with_offset = false) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InvalidParameter("x and y lengths differ");
  if (n < 5) throw InvalidParameter("Lorentzian fit needs at least 5 points");
  std::vector<double> w(n, 1.0);
  if (y_err) {
    if (y_err->size() != n) throw InvalidParameter("y_err length differs");
    for (std::size_t i = 0; i < n; ++i) {
      if (!((*y_err)[i] > 0)) throw InvalidParameter("y_err entries must be > 0");
      w[i] = 1.0 / (*y_err)[i];
    }
  }

  // Initial guess from the maximum and its half-maximum crossings.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::size_t peak = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (y[order[k]] > y[order[peak]]) peak = k;
  const double base = with_offset ? std::min(y[order.front()], y[order.back()]) : 0.0;
  const double amp = y[order[peak]] - base;
  const double half = base + 0.5 * amp;
  auto crossing = [&](int dir) {
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(peak); k + dir >= 0 && k + dir < static_cast<std::ptrdiff_t>(n);
         k += dir) {
      const double y0 = y[order[static_cast<std::size_t>(k)]], y1 = y[order[static_cast<std::size_t>(k + dir)]];
      if (y1 <= half) {
        const double x0 = x[order[static_cast<std::size_t>(k)]], x1 = x[order[static_cast<std::size_t>(k + dir)]];
        return y0 == y1 ? x1 : x0 + (half - y0) * (x1 - x0) / (y1 - y0);
      }
    }
    return x[order[dir < 0 ? 0 : n - 1]];
  };
  double width = crossing(+1) - crossing(-1);
  if (!(width > 0)) width = 0.5 * (x[order.back()] - x[order.front()]);

  Eigen::VectorXd p(with_offset ? 4 : 3);
  p(0) = amp;
  p(1) = x[order[peak]];
  p(2) = width;
  if (with_offset) p(3) = base;

  detail::LorentzFunctor f(x, y, w, with_offset);
  Eigen::LevenbergMarquardt<detail::LorentzFunctor> lm(f);
  lm.setXtol(1e-8);
  lm.setFtol(1e-14);
  lm.setMaxfev(200);
  const auto status = lm.minimize(p);

  LorentzianFit out;
  out.amplitude = p(0);
  out.center = p(1);
  out.fwhm = std::abs(p(2));
  out.offset = with_offset ? p(3) : 0.0;
  out.iterations = static_cast<int>(lm.iterations());
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  p(2) = out.fwhm;

  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  f(p, r);
  Eigen::MatrixXd j(static_cast<Eigen::Index>(n), p.size());
  f.df(p, j);
  double rn = 0.0;
  for (std::size_t i = 0; i < n; ++i) rn += std::pow(out(x[i]) - y[i], 2);
  out.residual_norm = std::sqrt(rn);
  const double dof = static_cast<double>(n) - static_cast<double>(p.size());
  const double scale = y_err ? 1.0 : (dof > 0 ? r.squaredNorm() / dof : 0.0);
  out.covariance = scale * (j.transpose() * j).completeOrthogonalDecomposition().pseudoInverse();
  if (!out.converged)
    throw FitError("Lorentzian fit did not converge after " + std::to_string(out.iterations) +
                   " iterations (last: A=" + std::to_string(out.amplitude) + ", x0=" + std::to_string(out.center) +
                   ", w=" + std::to_string(out.fwhm) + ")");
  return out;
}

// ---------------------------------------------------------------- power laws

struct PowerLawFit {
  double coefficient = 0.0;  // a in a x^b
  double exponent = 0.0;
  double coefficient_error = 0.0;
  double exponent_error = 0.0;
  double operator()(double x) const { return coefficient * std::pow(x, exponent); }
};

/// Straight line through (log x, log y).
inline PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InvalidParameter("x and y lengths differ");
  if (n < 3) throw InvalidParameter("power-law fit needs at least 3 points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw InvalidParameter("power-law fit needs strictly positive data");
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = std::log(x[i]);
    b(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  const double dof = static_cast<double>(n) - 2.0;
  const double s2 = dof > 0 ? (a * c - b).squaredNorm() / dof : 0.0;
  const Eigen::Matrix2d cov = s2 * (a.transpose() * a).inverse();
  PowerLawFit out;
  out.coefficient = std::exp(c(0));
  out.exponent = c(1);
  out.coefficient_error = out.coefficient * std::sqrt(cov(0, 0));
  out.exponent_error = std::sqrt(cov(1, 1));
  return out;
}

/// log(y2/y1) / log(x2/x1).
inline double two_point_exponent(double x1, double x2, double y1, double y2) {
  if (!(y1 > 0) || !(y2 > 0) || !(x1 > 0) || !(x2 > 0) || x1 == x2)
    throw InvalidParameter("two-point exponent needs positive values at distinct abscissae");
  return std::log(y2 / y1) / std::log(x2 / x1);
}

// ---------------------------------------------------------------- crossover

struct CrossoverFit {
  double a = 0.0;
  double omega_c = 0.0;
  double a_error = 0.0;
  double omega_c_error = 0.0;
  double sse = 0.0;
  bool crossover_detected = false;

  /// a W^2 below W_c, a W_c (2W - W_c) above.
  static double shape(double omega, double omega_c) {
    return omega < omega_c ? omega * omega : omega_c * (2.0 * omega - omega_c);
  }
  double operator()(double omega) const { return a * shape(omega, omega_c); }
};

namespace detail {
/// Optimal a and the residual sum of squares for a fixed crossover point.
inline std::pair<double, double> crossover_profile(const std::vector<double>& w, const std::vector<double>& r,
                                                   double wc) {
  double fy = 0.0, ff = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double f = CrossoverFit::shape(w[i], wc);
    fy += f * r[i];
    ff += f * f;
  }
  const double a = ff > 0 ? fy / ff : 0.0;
  double sse = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sse += std::pow(r[i] - a * CrossoverFit::shape(w[i], wc), 2);
  return {a, sse};
}
}  // namespace detail

/// Grid search over W_c in [min W, max W] with the amplitude solved in closed
/// form, refined by golden section around the best grid cell.
inline CrossoverFit fit_crossover(const std::vector<double>& omega, const std::vector<double>& r0,
                                  int grid_points = 2001) {
  const std::size_t n = omega.size();
  if (n != r0.size()) throw InvalidParameter("omega and r0 lengths differ");
  if (n < 3) throw InvalidParameter("crossover fit needs at least 3 points");
  for (double w : omega)
    if (!(w > 0)) throw InvalidParameter("omega must be > 0");
  const double lo = *std::min_element(omega.begin(), omega.end());
  const double hi = *std::max_element(omega.begin(), omega.end());
  if (!(hi > lo)) throw InvalidParameter("omega values must span a range");

  const double step = (hi - lo) / (grid_points - 1);
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid_points; ++k) {
    const double sse = detail::crossover_profile(omega, r0, lo + k * step).second;
    if (sse < best_sse) {
      best_sse = sse;
      best = k;
    }
  }
  double a_lo = lo + std::max(0, best - 1) * step, a_hi = lo + std::min(grid_points - 1, best + 1) * step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = a_hi - g * (a_hi - a_lo), d = a_lo + g * (a_hi - a_lo);
  double fc = detail::crossover_profile(omega, r0, c).second, fd = detail::crossover_profile(omega, r0, d).second;
  for (int it = 0; it < 200 && a_hi - a_lo > 1e-12 * hi; ++it) {
    if (fc < fd) {
      a_hi = d;
      d = c;
      fd = fc;
      c = a_hi - g * (a_hi - a_lo);
      fc = detail::crossover_profile(omega, r0, c).second;
    } else {
      a_lo = c;
      c = d;
      fc = fd;
      d = a_lo + g * (a_hi - a_lo);
      fd = detail::crossover_profile(omega, r0, d).second;
    }
  }
  double wc = 0.5 * (a_lo + a_hi);
  auto [a, sse] = detail::crossover_profile(omega, r0, wc);
  if (sse > best_sse) {
    wc = lo + best * step;
    std::tie(a, sse) = detail::crossover_profile(omega, r0, wc);
  }

  CrossoverFit out;
  out.a = a;
  out.omega_c = wc;
  out.sse = sse;
  out.crossover_detected = wc - lo > step && hi - wc > step;

  // Linearized errors from the Jacobian in (a, W_c).
  Eigen::MatrixXd j(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    j(r, 0) = CrossoverFit::shape(omega[i], wc);
    j(r, 1) = omega[i] < wc ? 0.0 : 2.0 * a * (omega[i] - wc);
  }
  const double dof = static_cast<double>(n) - 2.0;
  if (dof > 0) {
    const Eigen::Matrix2d cov = (sse / dof) * (j.transpose() * j).completeOrthogonalDecomposition().pseudoInverse();
    out.a_error = std::sqrt(std::max(0.0, cov(0, 0)));
    out.omega_c_error = std::sqrt(std::max(0.0, cov(1, 1)));
  }
  return out;
}

// ---------------------------------------------------------------- blockade radius

enum class BlockadeMethod { many_body, two_body };

inline const char* method_name(BlockadeMethod m) { return m == BlockadeMethod::many_body ? "many_body" : "two_body"; }

struct BlockadeRadiusResult {
  double r_b = 0.0;
  double plateau_value = 0.0;
  BlockadeMethod method = BlockadeMethod::many_body;
  double smoothing_window = 1.0;
  std::vector<std::pair<double, double>> smoothed;  // (r_eff, windowed mean)
};

/// Correlations keyed by effective distance (repeated keys allowed) are
/// averaged over a centered window; the radius is where the smoothed curve
/// first climbs to half the value at the smallest distance.
inline BlockadeRadiusResult extract_blockade_radius(const std::vector<std::pair<double, double>>& correlations,
                                                    double window = 1.0,
                                                    BlockadeMethod method = BlockadeMethod::many_body) {
  if (!(window > 0)) throw InvalidParameter("window must be > 0");
  std::vector<std::pair<double, double>> pts;
  for (const auto& c : correlations)
    if (std::isfinite(c.first)) pts.push_back(c);
  if (pts.size() < 3) throw InvalidParameter("blockade radius needs at least 3 finite points");
  std::sort(pts.begin(), pts.end());
  if (!(pts.front().first < 2.0)) throw InvalidParameter("no correlation data below r_eff = 2");

  BlockadeRadiusResult out;
  out.method = method;
  out.smoothing_window = window;
  std::size_t lo = 0, hi = 0;
  double sum = 0.0;
  std::vector<double> centers;
  for (const auto& p : pts)
    if (centers.empty() || p.first > centers.back()) centers.push_back(p.first);
  for (double r : centers) {
    while (hi < pts.size() && pts[hi].first <= r + 0.5 * window + 1e-12) sum += pts[hi++].second;
    while (lo < hi && pts[lo].first < r - 0.5 * window - 1e-12) sum -= pts[lo++].second;
    out.smoothed.emplace_back(r, sum / static_cast<double>(hi - lo));
  }
  out.plateau_value = out.smoothed.front().second;
  if (!(out.plateau_value < 0)) throw FitError("plateau is not negative: no blockade signature");
  const double target = 0.5 * out.plateau_value;
  for (std::size_t k = 1; k < out.smoothed.size(); ++k) {
    const auto [r1, v1] = out.smoothed[k];
    if (v1 >= target) {
      const auto [r0, v0] = out.smoothed[k - 1];
      out.r_b = v1 == v0 ? r1 : r0 + (target - v0) * (r1 - r0) / (v1 - v0);
      return out;
    }
  }
  throw FitError("correlations never decay to half the plateau within the data range");
}

// ---------------------------------------------------------------- divergence edge

struct EdgeSample {
  double c3;
  double delta;
  bool diverged;
};

struct DivergenceEdgeFit {
  std::vector<std::pair<double, double>> edge;  // (C3, outer boundary delta)
  PowerLawFit fit;
};

/// Per C3 column, the outer boundary sits midway between the largest
/// diverged |delta| and the next converged one above it.
inline std::vector<std::pair<double, double>> divergence_edges(const std::vector<EdgeSample>& scan) {
  std::map<double, std::vector<std::pair<double, bool>>> cols;
  for (const auto& s : scan) cols[s.c3].emplace_back(std::abs(s.delta), s.diverged);
  std::vector<std::pair<double, double>> out;
  for (auto& [c3, col] : cols) {
    std::sort(col.begin(), col.end());
    std::ptrdiff_t last = -1;
    for (std::size_t k = 0; k < col.size(); ++k)
      if (col[k].second) last = static_cast<std::ptrdiff_t>(k);
    if (last < 0 || last + 1 >= static_cast<std::ptrdiff_t>(col.size())) continue;  // uniform or open edge
    out.emplace_back(c3, 0.5 * (col[static_cast<std::size_t>(last)].first + col[static_cast<std::size_t>(last + 1)].first));
  }
  return out;
}

inline DivergenceEdgeFit divergence_edge_fit(const std::vector<EdgeSample>& scan) {
  DivergenceEdgeFit out;
  out.edge = divergence_edges(scan);
  std::vector<double> x, y;
  for (const auto& [c, d] : out.edge) {
    x.push_back(c);
    y.push_back(d);
  }
  if (x.size() < 3) throw FitError("fewer than 3 C3 columns contain a divergence edge");
  out.fit = fit_power_law(x, y);
  return out;
}

}  // namespace rydberg::analysis
