#include "momentctl/ensemble.hpp"

#include <cmath>

namespace momentctl {

ParamInterval::ParamInterval(double lo, double hi) : lo_(lo), hi_(hi) {
  MOMENTCTL_REQUIRE(std::isfinite(lo) && std::isfinite(hi),
                    "parameter interval endpoints must be finite");
  MOMENTCTL_REQUIRE(lo < hi, "parameter interval requires lo < hi");
}

bool ControlBounds::has_amplitude() const {
  return std::isfinite(u_min) || std::isfinite(u_max);
}

bool ControlBounds::has_slew() const {
  return std::isfinite(du_min) || std::isfinite(du_max);
}

void ControlBounds::validate() const {
  MOMENTCTL_REQUIRE(!std::isnan(u_min) && !std::isnan(u_max) &&
                        !std::isnan(du_min) && !std::isnan(du_max),
                    "control bounds must not be NaN");
  MOMENTCTL_REQUIRE(u_min <= u_max, "control bounds require u_min <= u_max");
  MOMENTCTL_REQUIRE(du_min <= du_max,
                    "slew bounds require du_min <= du_max");
}

void EnsembleSystem::validate() const {
  const Index n = drift.rows();
  MOMENTCTL_REQUIRE(n > 0 && drift.cols() == n,
                    "drift matrix must be square and non-empty");
  for (const auto& b : inputs) {
    MOMENTCTL_REQUIRE(b.rows() == n && b.cols() == n,
                      "input matrix dimension does not match drift matrix");
  }
  MOMENTCTL_REQUIRE(x0.size() == n && xT.size() == n,
                    "endpoint dimension does not match drift matrix");
  MOMENTCTL_REQUIRE(x0.allFinite() && xT.allFinite(),
                    "endpoints must be finite");
  bounds.validate();
}

Matrix EnsembleSystem::member_generator(double alpha, double beta,
                                        const Eigen::Ref<const Vector>& u) const {
  MOMENTCTL_REQUIRE(u.size() == input_count(), "control size mismatch");
  Matrix g = alpha * drift;
  for (Index i = 0; i < input_count(); ++i) g += (beta * u(i)) * inputs[i];
  return g;
}

}  // namespace momentctl
