#include "momentctl/dynamics.hpp"

#include <cmath>

#include "momentctl/expm.hpp"

namespace momentctl::dynamics {

using moments::MomentSystem;

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  MOMENTCTL_REQUIRE(times_.size() >= 2, "time grid needs at least one step");
  MOMENTCTL_REQUIRE(times_.front() == 0.0, "time grid must start at 0");
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    MOMENTCTL_REQUIRE(std::isfinite(times_[k + 1]) && times_[k + 1] > times_[k],
                      "time grid must be strictly increasing");
  }
}

TimeGrid TimeGrid::uniform(double horizon, Index steps) {
  MOMENTCTL_REQUIRE(std::isfinite(horizon) && horizon > 0.0,
                    "horizon must be positive");
  MOMENTCTL_REQUIRE(steps >= 1, "step count must be >= 1");
  std::vector<double> t(steps + 1);
  for (Index k = 0; k <= steps; ++k) {
    t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  }
  t.back() = horizon;
  return TimeGrid(std::move(t));
}

std::pair<TimeGrid, TimeGrid> TimeGrid::split(Index split) const {
  MOMENTCTL_REQUIRE(split > 0 && split < steps(), "split index out of range");
  std::vector<double> first(times_.begin(), times_.begin() + split + 1);
  std::vector<double> second;
  const double origin = times_[split];
  for (Index k = split; k <= steps(); ++k) second.push_back(times_[k] - origin);
  second.front() = 0.0;
  return {TimeGrid(std::move(first)), TimeGrid(std::move(second))};
}

ControlTrajectory ControlTrajectory::zeros(TimeGrid grid, Index m) {
  const Index K = grid.steps();
  return ControlTrajectory{std::move(grid), Matrix::Zero(K, m)};
}

ControlTrajectory ControlTrajectory::constant(TimeGrid grid, Index m,
                                              double value) {
  const Index K = grid.steps();
  return ControlTrajectory{std::move(grid), Matrix::Constant(K, m, value)};
}

double ControlTrajectory::bound_violation(const ControlBounds& b) const {
  double worst = 0.0;
  for (Index k = 0; k < U.rows(); ++k) {
    for (Index i = 0; i < U.cols(); ++i) {
      worst = std::max({worst, b.u_min - U(k, i), U(k, i) - b.u_max});
      if (k + 1 < U.rows()) {
        const double rate = (U(k + 1, i) - U(k, i)) / grid.dt(k);
        worst = std::max({worst, b.du_min - rate, rate - b.du_max});
      }
    }
  }
  return worst;
}

void ControlTrajectory::validate(Index m) const {
  MOMENTCTL_REQUIRE(U.rows() == grid.steps(),
                    "control rows must equal the number of time steps");
  MOMENTCTL_REQUIRE(U.cols() == m, "control columns must equal input count");
  MOMENTCTL_REQUIRE(U.allFinite(), "controls must be finite");
}

LinearizedModel::LinearizedModel(std::shared_ptr<const Matrix> basis,
                                 std::vector<Index> offsets,
                                 std::vector<StepPropagator> transitions,
                                 std::vector<Matrix> modal_inputs)
    : basis_(std::move(basis)),
      offsets_(std::move(offsets)),
      transitions_(std::move(transitions)),
      modal_inputs_(std::move(modal_inputs)) {
  MOMENTCTL_REQUIRE(transitions_.size() == modal_inputs_.size(),
                    "transition and input counts differ");
  MOMENTCTL_REQUIRE(!transitions_.empty(), "linearization needs >= 1 step");
  dim_ = modal_inputs_.front().rows();
}

Index LinearizedModel::inputs() const { return modal_inputs_.front().cols(); }

Matrix LinearizedModel::transition(Index k) const {
  Matrix modal = Matrix::Zero(dim_, dim_);
  const auto& blocks = transitions_.at(k).blocks;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Index off = offsets_[b];
    const Index s = blocks[b].rows();
    modal.block(off, off, s, s) = blocks[b];
  }
  if (!basis_) return modal;
  return *basis_ * modal * basis_->transpose();
}

Matrix LinearizedModel::input(Index k) const {
  if (!basis_) return modal_inputs_.at(k);
  return *basis_ * modal_inputs_.at(k);
}

Vector LinearizedModel::to_modal(const Eigen::Ref<const Vector>& x) const {
  if (!basis_) return x;
  return basis_->transpose() * x;
}

Vector LinearizedModel::from_modal(const Eigen::Ref<const Vector>& y) const {
  if (!basis_) return y;
  return *basis_ * y;
}

namespace {

Matrix block_generator(const moments::GeneratorBlock& blk,
                       const Eigen::Ref<const Vector>& u) {
  Matrix g = blk.drift;
  for (std::size_t i = 0; i < blk.inputs.size(); ++i) {
    g += u(static_cast<Index>(i)) * blk.inputs[i];
  }
  return g;
}

// y <- blockdiag(P) y, in modal coordinates.
Vector apply_modal(const MomentSystem& ms, const StepPropagator& p,
                   const Eigen::Ref<const Vector>& y) {
  Vector out(y.size());
  for (std::size_t b = 0; b < ms.blocks.size(); ++b) {
    const Index off = ms.blocks[b].offset;
    const Index s = ms.blocks[b].size();
    out.segment(off, s).noalias() = p.blocks[b] * y.segment(off, s);
  }
  return out;
}

std::vector<Index> block_offsets(const MomentSystem& ms) {
  std::vector<Index> offsets;
  offsets.reserve(ms.blocks.size());
  for (const auto& blk : ms.blocks) offsets.push_back(blk.offset);
  return offsets;
}

// Returns propagators for traj, reusing the cached ones when they were built
// from exactly these controls. Throws when traj is stale.
std::shared_ptr<const std::vector<StepPropagator>> checked_propagators(
    const MomentSystem& ms, const ControlTrajectory& ctrl,
    const StateTrajectory& traj) {
  ctrl.validate(ms.m);
  const Index K = ctrl.steps();
  MOMENTCTL_REQUIRE(traj.x.rows() == K + 1 && traj.x.cols() == ms.dim(),
                    "trajectory shape does not match controls");

  const double scale = 1.0 + ms.x0.norm();
  MOMENTCTL_REQUIRE((traj.state(0) - ms.x0).norm() <= 1e-12 * scale,
                    "stale trajectory: initial state differs from x0");

  if (traj.propagators && traj.controls.rows() == ctrl.U.rows() &&
      traj.controls.cols() == ctrl.U.cols() && traj.controls == ctrl.U) {
    return traj.propagators;
  }

  const Vector x1 = step(ms.x0, ctrl.U.row(0).transpose(), ctrl.grid.dt(0), ms);
  MOMENTCTL_REQUIRE((x1 - traj.state(1)).norm() <= 1e-10 * scale,
                    "stale trajectory: first step does not match controls");

  auto props = std::make_shared<std::vector<StepPropagator>>();
  props->reserve(K);
  for (Index k = 0; k < K; ++k) {
    props->push_back(propagator(ms, ctrl.U.row(k).transpose(), ctrl.grid.dt(k)));
  }
  return props;
}

Matrix modal_states(const MomentSystem& ms, const StateTrajectory& traj) {
  // Row k is y_k' = x_k' W.
  if (!ms.modal_basis) return traj.x;
  return traj.x * *ms.modal_basis;
}

}  // namespace

StepPropagator propagator(const MomentSystem& ms,
                          const Eigen::Ref<const Vector>& u, double dt) {
  MOMENTCTL_REQUIRE(dt > 0.0, "time step must be positive");
  MOMENTCTL_REQUIRE(u.size() == ms.m, "control size mismatch");
  StepPropagator p;
  p.blocks.reserve(ms.blocks.size());
  for (const auto& blk : ms.blocks) {
    p.blocks.push_back(expm(dt * block_generator(blk, u)));
  }
  return p;
}

Vector step(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
            double dt, const MomentSystem& ms) {
  MOMENTCTL_REQUIRE(x.size() == ms.dim(), "state size mismatch");
  const StepPropagator p = propagator(ms, u, dt);
  return ms.from_modal(apply_modal(ms, p, ms.to_modal(x)));
}

StateTrajectory simulate_from(const MomentSystem& ms,
                              const ControlTrajectory& ctrl,
                              const Eigen::Ref<const Vector>& initial) {
  ctrl.validate(ms.m);
  MOMENTCTL_REQUIRE(initial.size() == ms.dim(), "initial state size mismatch");
  const Index K = ctrl.steps();

  auto props = std::make_shared<std::vector<StepPropagator>>();
  props->reserve(K);
  Matrix y(K + 1, ms.dim());
  y.row(0) = ms.to_modal(initial).transpose();
  for (Index k = 0; k < K; ++k) {
    props->push_back(propagator(ms, ctrl.U.row(k).transpose(), ctrl.grid.dt(k)));
    y.row(k + 1) = apply_modal(ms, props->back(), y.row(k).transpose()).transpose();
  }

  StateTrajectory traj;
  traj.x = ms.modal_basis ? Matrix(y * ms.modal_basis->transpose()) : y;
  traj.x.row(0) = initial.transpose();
  traj.propagators = std::move(props);
  traj.controls = ctrl.U;
  return traj;
}

StateTrajectory simulate(const MomentSystem& ms, const ControlTrajectory& ctrl) {
  return simulate_from(ms, ctrl, ms.x0);
}

LinearizedModel linearize_discrete_first(const MomentSystem& ms,
                                         const ControlTrajectory& ctrl,
                                         const StateTrajectory& traj) {
  auto props = checked_propagators(ms, ctrl, traj);
  const Index K = ctrl.steps();
  const Matrix y = modal_states(ms, traj);

  std::vector<Matrix> inputs;
  inputs.reserve(K);
  for (Index k = 0; k < K; ++k) {
    const double dt = ctrl.grid.dt(k);
    Matrix Bk(ms.dim(), ms.m);
    for (std::size_t b = 0; b < ms.blocks.size(); ++b) {
      const auto& blk = ms.blocks[b];
      const Index off = blk.offset;
      const Index s = blk.size();
      const Vector yk = y.row(k).segment(off, s).transpose();
      for (Index i = 0; i < ms.m; ++i) {
        Bk.block(off, i, s, 1).noalias() =
            dt * ((*props)[k].blocks[b] * (blk.inputs[i] * yk));
      }
    }
    inputs.push_back(std::move(Bk));
  }
  return LinearizedModel(ms.modal_basis, block_offsets(ms), *props,
                         std::move(inputs));
}

LinearizedModel linearize_continuous_first(const MomentSystem& ms,
                                           const ControlTrajectory& ctrl,
                                           const StateTrajectory& traj,
                                           Quadrature quadrature) {
  if (quadrature != Quadrature::kExact &&
      quadrature != Quadrature::kLeftEndpoint) {
    throw Error("unknown quadrature mode");
  }
  auto props = checked_propagators(ms, ctrl, traj);
  const Index K = ctrl.steps();
  const Matrix y = modal_states(ms, traj);

  std::vector<Matrix> inputs;
  inputs.reserve(K);
  for (Index k = 0; k < K; ++k) {
    const double dt = ctrl.grid.dt(k);
    const Vector uk = ctrl.U.row(k).transpose();
    Matrix Bk(ms.dim(), ms.m);
    for (std::size_t b = 0; b < ms.blocks.size(); ++b) {
      const auto& blk = ms.blocks[b];
      const Index off = blk.offset;
      const Index s = blk.size();
      const Vector yk = y.row(k).segment(off, s).transpose();
      if (quadrature == Quadrature::kLeftEndpoint) {
        // dt * exp((t_{k+1} - t_k) Abar) * Bbar(t_k)
        const Matrix& E = (*props)[k].blocks[b];
        for (Index i = 0; i < ms.m; ++i) {
          const Vector bbar = blk.inputs[i] * yk;
          Bk.block(off, i, s, 1).noalias() = dt * (E * bbar);
        }
        continue;
      }
      // exp(dt [[Abar, B_i], [0, Abar]]) [0; y_k] has top half
      // int_0^dt exp((dt - s) Abar) B_i exp(s Abar) y_k ds.
      const Matrix Abar = block_generator(blk, uk);
      for (Index i = 0; i < ms.m; ++i) {
        Matrix aug = Matrix::Zero(2 * s, 2 * s);
        aug.topLeftCorner(s, s) = Abar;
        aug.topRightCorner(s, s) = blk.inputs[i];
        aug.bottomRightCorner(s, s) = Abar;
        const Matrix E = expm(dt * aug);
        Bk.block(off, i, s, 1).noalias() = E.topRightCorner(s, s) * yk;
      }
    }
    inputs.push_back(std::move(Bk));
  }
  return LinearizedModel(ms.modal_basis, block_offsets(ms), *props,
                         std::move(inputs));
}

Matrix build_H(const LinearizedModel& lin, bool drop_final_interval) {
  const Index K = lin.steps();
  const Index m = lin.inputs();
  const Index D = lin.dim();
  const Index cols_steps = drop_final_interval ? K - 1 : K;
  MOMENTCTL_REQUIRE(cols_steps >= 1, "evolution matrix would be empty");

  const auto& offsets = lin.block_offsets();
  const std::size_t nblocks = offsets.size();

  // Running product R = A_{K-1} ... A_{k+1}, kept block diagonal.
  std::vector<Matrix> R(nblocks);
  for (std::size_t b = 0; b < nblocks; ++b) {
    const Index s = lin.modal_transitions()[0].blocks[b].rows();
    R[b] = Matrix::Identity(s, s);
  }

  Matrix Hmodal(D, m * cols_steps);
  for (Index k = K - 1; k >= 0; --k) {
    const Matrix& Bk = lin.modal_inputs()[k];
    const auto& Ak = lin.modal_transitions()[k].blocks;
    for (std::size_t b = 0; b < nblocks; ++b) {
      const Index off = offsets[b];
      const Index s = R[b].rows();
      if (k < cols_steps) {
        Hmodal.block(off, k * m, s, m).noalias() = R[b] * Bk.middleRows(off, s);
      }
      R[b] = R[b] * Ak[b];
    }
  }
  if (!lin.basis()) return Hmodal;
  return *lin.basis() * Hmodal;
}

std::vector<Vector> propagate_perturbation(const LinearizedModel& lin,
                                           const Eigen::Ref<const Matrix>& du) {
  const Index K = lin.steps();
  MOMENTCTL_REQUIRE(du.rows() == K && du.cols() == lin.inputs(),
                    "perturbation shape must be K x m");
  const auto& offsets = lin.block_offsets();
  std::vector<Vector> out;
  out.reserve(K + 1);
  Vector y = Vector::Zero(lin.dim());
  out.push_back(lin.from_modal(y));
  for (Index k = 0; k < K; ++k) {
    Vector next = lin.modal_inputs()[k] * du.row(k).transpose();
    const auto& Ak = lin.modal_transitions()[k].blocks;
    for (std::size_t b = 0; b < offsets.size(); ++b) {
      const Index s = Ak[b].rows();
      next.segment(offsets[b], s) += Ak[b] * y.segment(offsets[b], s);
    }
    y = std::move(next);
    out.push_back(lin.from_modal(y));
  }
  return out;
}

}  // namespace momentctl::dynamics
