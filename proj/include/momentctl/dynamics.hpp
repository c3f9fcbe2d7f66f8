#pragma once

#include <memory>
#include <vector>

#include "momentctl/common.hpp"
#include "momentctl/moments.hpp"

namespace momentctl::dynamics {

/// Sampling times 0 = t_0 < t_1 < ... < t_K = T.
class TimeGrid {
 public:
  TimeGrid() : times_{0.0, 1.0} {}
  explicit TimeGrid(std::vector<double> times);
  static TimeGrid uniform(double horizon, Index steps);

  Index steps() const { return static_cast<Index>(times_.size()) - 1; }
  double horizon() const { return times_.back(); }
  double t(Index k) const { return times_[k]; }
  double dt(Index k) const { return times_[k + 1] - times_[k]; }
  const std::vector<double>& times() const { return times_; }

  /// Split into [t_0, t_split] and [t_split, t_K] with times shifted so the
  /// second grid starts at zero.
  std::pair<TimeGrid, TimeGrid> split(Index split) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> times_;
};

/// Zero-order-hold controls: row k of U holds u(t) on [t_k, t_{k+1}).
struct ControlTrajectory {
  TimeGrid grid;
  Matrix U;  // K x m

  Index steps() const { return grid.steps(); }
  Index inputs() const { return U.cols(); }

  static ControlTrajectory zeros(TimeGrid grid, Index m);
  static ControlTrajectory constant(TimeGrid grid, Index m, double value);

  /// Largest violation of amplitude and slew bounds (0 when feasible).
  double bound_violation(const ControlBounds& b) const;
  /// Throws Error when dimensions are inconsistent.
  void validate(Index m) const;
};

/// Exact ZOH propagator exp(dt (A + sum u_i B_i)) stored as the diagonal
/// blocks of its modal representation.
struct StepPropagator {
  std::vector<Matrix> blocks;
};

/// Moment trajectory; row k is x(t_k).
struct StateTrajectory {
  Matrix x;  // (K+1) x D

  Vector state(Index k) const { return x.row(k).transpose(); }
  Vector terminal() const { return x.row(x.rows() - 1).transpose(); }

  // Propagators used to produce x, tagged with the controls they came from.
  std::shared_ptr<const std::vector<StepPropagator>> propagators;
  Matrix controls;
};

/// Per-step linearization delta x_{k+1} = A_k delta x_k + B_k delta u_k and
/// the evolution matrix H mapping stacked delta u to delta x_K.
///
/// Transition matrices are held in the system's modal basis, where they are
/// block diagonal; transition() expands one to a dense D x D matrix.
class LinearizedModel {
 public:
  LinearizedModel(std::shared_ptr<const Matrix> basis,
                  std::vector<Index> offsets,
                  std::vector<StepPropagator> transitions,
                  std::vector<Matrix> modal_inputs);

  Index steps() const { return static_cast<Index>(transitions_.size()); }
  Index dim() const { return dim_; }
  Index inputs() const;

  /// Dense A_k in moment coordinates.
  Matrix transition(Index k) const;
  /// B_k (D x m) in moment coordinates.
  Matrix input(Index k) const;

  const std::vector<StepPropagator>& modal_transitions() const {
    return transitions_;
  }
  const std::vector<Matrix>& modal_inputs() const { return modal_inputs_; }
  const std::vector<Index>& block_offsets() const { return offsets_; }
  const std::shared_ptr<const Matrix>& basis() const { return basis_; }

  /// Moment-coordinate vector -> modal coordinates and back.
  Vector to_modal(const Eigen::Ref<const Vector>& x) const;
  Vector from_modal(const Eigen::Ref<const Vector>& y) const;

 private:
  std::shared_ptr<const Matrix> basis_;
  std::vector<Index> offsets_;
  std::vector<StepPropagator> transitions_;
  std::vector<Matrix> modal_inputs_;
  Index dim_ = 0;
};

/// Propagator for one ZOH interval.
StepPropagator propagator(const moments::MomentSystem& ms,
                          const Eigen::Ref<const Vector>& u, double dt);

/// exp(dt (A + sum u_i B_i)) x.
Vector step(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
            double dt, const moments::MomentSystem& ms);

/// x_{k+1} = step(x_k, U_k, dt_k) from x_0 = ms.x0.
StateTrajectory simulate(const moments::MomentSystem& ms,
                         const ControlTrajectory& ctrl);

/// Same recursion from an arbitrary initial state.
StateTrajectory simulate_from(const moments::MomentSystem& ms,
                              const ControlTrajectory& ctrl,
                              const Eigen::Ref<const Vector>& initial);

/// Discretize, then linearize:
///   A_k = exp(dt_k (A + sum Ubar_i B_i)),
///   B_k = dt_k A_k [B_1 xbar_k, .., B_m xbar_k].
/// Throws Error when traj was not produced by ctrl.
LinearizedModel linearize_discrete_first(const moments::MomentSystem& ms,
                                         const ControlTrajectory& ctrl,
                                         const StateTrajectory& traj);

enum class Quadrature { kExact, kLeftEndpoint };

/// Linearize in continuous time, then discretize. The input matrix is the
/// convolution int_{t_k}^{t_{k+1}} exp((t_{k+1}-s) Abar_k) Bbar(s) ds with
/// xbar(s) propagated within the step; kExact evaluates it through an
/// augmented block exponential, kLeftEndpoint by the left-endpoint rule.
LinearizedModel linearize_continuous_first(const moments::MomentSystem& ms,
                                           const ControlTrajectory& ctrl,
                                           const StateTrajectory& traj,
                                           Quadrature quadrature);

/// H = [A_{K-1}..A_1 B_0, .., A_{K-1} B_{K-2}, B_{K-1}] by one backward
/// sweep. With drop_final_interval the last block column is omitted.
Matrix build_H(const LinearizedModel& lin, bool drop_final_interval = false);

/// delta x_0 = 0, delta x_{k+1} = A_k delta x_k + B_k delta u_k for
/// k = 0..K-1; returns the K+1 states in moment coordinates.
std::vector<Vector> propagate_perturbation(const LinearizedModel& lin,
                                           const Eigen::Ref<const Matrix>& du);

}  // namespace momentctl::dynamics
