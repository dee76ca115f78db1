#pragma once

#include "rydberg/params.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace rydberg {

struct PolynomialFit {
  std::vector<double> coefficients;  // c0 + c1 x + ...
  double residual_norm = 0.0;
  double max_abs_residual = 0.0;

  double operator()(double x) const {
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * x + *it;
    return v;
  }
};

/// Least-squares polynomial of the given degree (QR on the Vandermonde matrix).
inline PolynomialFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  if (x.size() != y.size()) throw InvalidParameter("polyfit: size mismatch");
  if (degree < 0 || x.size() < static_cast<std::size_t>(degree + 1))
    throw InvalidParameter("polyfit: need at least degree + 1 points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      a(i, k) = p;
      p *= x[static_cast<std::size_t>(i)];
    }
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  PolynomialFit out;
  out.coefficients.assign(c.data(), c.data() + c.size());
  const Eigen::VectorXd r = a * c - b;
  out.residual_norm = r.norm();
  out.max_abs_residual = r.cwiseAbs().maxCoeff();
  return out;
}

}  // namespace rydberg
