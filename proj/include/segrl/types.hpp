#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace segrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

// Invalid run configuration (bad values, unknown ids, failed validation).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required; aborts the run.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace segrl
