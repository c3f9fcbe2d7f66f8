#pragma once

#include <vector>

#include "momentctl/dynamics.hpp"
#include "momentctl/ensemble.hpp"
#include "momentctl/moments.hpp"

namespace momentctl::verify {

/// Parameter grid for post-synthesis checks.
struct GridSpec {
  enum class Spacing { kUniform, kChebyshev };
  int n_alpha = 21;
  int n_beta = 21;
  Spacing spacing = Spacing::kUniform;

  void validate() const;
  /// n points spanning [lo, hi], endpoints included.
  std::vector<double> points(const ParamInterval& iv, int n) const;
};

struct VerificationResult {
  std::vector<double> alpha;  // row-major over (alpha, beta)
  std::vector<double> beta;
  std::vector<double> terminal_error;
  double max_error = 0.0;
  double mean_error = 0.0;
  // Filled only when requested.
  std::vector<Matrix> trajectories;
};

/// X_{k+1} = exp(dt_k (alpha A + beta sum_i U_ki B_i)) X_k from X_0; rows of
/// the result are X(t_0) .. X(t_K).
Matrix simulate_member(const EnsembleSystem& sys, double alpha, double beta,
                       const dynamics::ControlTrajectory& ctrl);

/// Terminal error ||X(T; alpha, beta) - X_T|| over the grid. Points are
/// evaluated on `threads` workers; results are always in row-major order.
VerificationResult grid_verify(const EnsembleSystem& sys,
                               const dynamics::ControlTrajectory& ctrl,
                               const GridSpec& grid, int threads = 1,
                               bool keep_trajectories = false);

struct MomentDiscrepancy {
  double max_coefficient = 0.0;     // moment ODE vs quadrature projection
  double max_reconstruction = 0.0;  // reconstruction vs member, on the rule
  int quadrature_points = 0;
};

/// Compare moment-ODE terminal coefficients with quadrature projections of
/// directly simulated members. quad_points = 0 selects the default rule.
MomentDiscrepancy cross_validate_moments(const EnsembleSystem& sys,
                                         const moments::MomentSystem& ms,
                                         const dynamics::ControlTrajectory& ctrl,
                                         int quad_points = 0);

}  // namespace momentctl::verify
