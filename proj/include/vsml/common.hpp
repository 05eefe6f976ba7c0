#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsml {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a configuration, file format, or CLI argument is invalid.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values. `where` identifies
// the failing unit (e.g. "layer 2 cell (3,1)"), `step` the inner-loop step
// if known (-1 otherwise).
struct NumericFault : std::runtime_error {
  std::string where;
  long step = -1;
  NumericFault(const std::string& where_, long step_ = -1)
      : std::runtime_error("numeric fault at " + where_ +
                           (step_ >= 0 ? " (step " + std::to_string(step_) + ")" : "")),
        where(where_),
        step(step_) {}
};

}  // namespace vsml
