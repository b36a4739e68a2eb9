#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace segrl {

// Max-shifted softmax. Accepts any dense Eigen expression; -inf logits map
// to probability zero.
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& logits) {
  Eigen::VectorXd z = logits;
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  Eigen::VectorXd z = v;
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((z.array() - m).exp().sum());
}

// Shannon entropy -sum p ln p with the 0 ln 0 = 0 convention.
template <typename Derived>
double entropy(const Eigen::MatrixBase<Derived>& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs.derived()(i);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace segrl
