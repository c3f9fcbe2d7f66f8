#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace momentctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when an input violates a documented precondition.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define MOMENTCTL_REQUIRE(cond, msg)                 \
  do {                                               \
    if (!(cond)) throw ::momentctl::Error(msg);      \
  } while (false)

}  // namespace momentctl
