#pragma once

// Test-only central finite-difference oracle, kept independent of the
// analytic gradient paths it checks.

#include <segrl/policy.hpp>
#include <segrl/types.hpp>

#include <functional>

namespace segrl::testing {

// d f / d W by central differences, step h, for scalar f(params).
inline Matrix fd_gradient(const PolicyParams& params,
                          const std::function<double(const PolicyParams&)>& f, double h = 1e-5) {
  Matrix grad(params.weights.rows(), params.weights.cols());
  PolicyParams probe = params;
  for (Eigen::Index j = 0; j < params.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < params.weights.rows(); ++i) {
      const double w = params.weights(i, j);
      probe.weights(i, j) = w + h;
      const double up = f(probe);
      probe.weights(i, j) = w - h;
      const double down = f(probe);
      probe.weights(i, j) = w;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// Relative error between matrices under the max norm.
inline double rel_error(const Matrix& a, const Matrix& b) {
  const double denom = std::max(1e-12, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

}  // namespace segrl::testing
