#pragma once

#include <limits>
#include <vector>

#include "momentctl/common.hpp"

namespace momentctl {

/// Closed parameter interval [lo, hi] with lo < hi.
class ParamInterval {
 public:
  ParamInterval(double lo, double hi);

  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Amplitude and slew limits on every control channel. Infinite values mean
/// the corresponding side is unconstrained.
struct ControlBounds {
  double u_min = -std::numeric_limits<double>::infinity();
  double u_max = std::numeric_limits<double>::infinity();
  double du_min = -std::numeric_limits<double>::infinity();
  double du_max = std::numeric_limits<double>::infinity();

  bool has_amplitude() const;
  bool has_slew() const;
  void validate() const;
};

/// The family dX/dt = alpha*A X + beta*sum_i U_i B_i X over
/// (alpha, beta) in alpha_range x beta_range, with shared endpoints.
struct EnsembleSystem {
  Matrix drift;                  // n x n
  std::vector<Matrix> inputs;    // m matrices, n x n
  ParamInterval alpha_range{-1.0, 1.0};
  ParamInterval beta_range{-1.0, 1.0};
  Vector x0;
  Vector xT;
  ControlBounds bounds;

  Index state_dim() const { return drift.rows(); }
  Index input_count() const { return static_cast<Index>(inputs.size()); }

  /// Throws Error when dimensions disagree or endpoints are not finite.
  void validate() const;

  /// Generator alpha*A + beta*sum_i u_i B_i of a single member.
  Matrix member_generator(double alpha, double beta,
                          const Eigen::Ref<const Vector>& u) const;
};

}  // namespace momentctl
