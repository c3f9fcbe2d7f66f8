#include "momentctl/synth.hpp"

#include <chrono>
#include <cmath>

namespace momentctl::synth {

using dynamics::ControlTrajectory;
using dynamics::StateTrajectory;
using dynamics::TimeGrid;
using moments::MomentSystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Row-major flattening (k, i) -> k*m + i.
Vector flatten(const Matrix& U) {
  Vector v(U.size());
  for (Index k = 0; k < U.rows(); ++k)
    for (Index i = 0; i < U.cols(); ++i) v(k * U.cols() + i) = U(k, i);
  return v;
}

Matrix unflatten(const Vector& v, Index K, Index m) {
  Matrix U(K, m);
  for (Index k = 0; k < K; ++k)
    for (Index i = 0; i < m; ++i) U(k, i) = v(k * m + i);
  return U;
}

// QP in scaled variables w = Lambda du shared by both stages: box and slew
// rows for U + du, plus the frozen final interval when requested.
void add_control_constraints(qp::QProblem& p, const ControlTrajectory& ctrl,
                             const ControlBounds& b, bool freeze_final) {
  const Index K = ctrl.steps();
  const Index m = ctrl.inputs();
  const Index nv = K * m;
  const double inf = std::numeric_limits<double>::infinity();

  if (b.has_amplitude() || freeze_final) {
    p.lb = Vector::Constant(nv, -inf);
    p.ub = Vector::Constant(nv, inf);
    for (Index k = 0; k < K; ++k) {
      const double dt = ctrl.grid.dt(k);
      for (Index i = 0; i < m; ++i) {
        const Index j = k * m + i;
        if (std::isfinite(b.u_min)) p.lb(j) = dt * (b.u_min - ctrl.U(k, i));
        if (std::isfinite(b.u_max)) p.ub(j) = dt * (b.u_max - ctrl.U(k, i));
      }
    }
    if (freeze_final) {
      for (Index i = 0; i < m; ++i) {
        p.lb((K - 1) * m + i) = 0.0;
        p.ub((K - 1) * m + i) = 0.0;
      }
    }
  }

  if (b.has_slew() && K >= 2) {
    // dt_k * rate_k = w_{k+1}/dt_{k+1} - w_k/dt_k + (U_{k+1} - U_k).
    std::vector<std::pair<Vector, double>> rows;
    for (Index k = 0; k + 1 < K; ++k) {
      const double dt = ctrl.grid.dt(k);
      const double dt_next = ctrl.grid.dt(k + 1);
      for (Index i = 0; i < m; ++i) {
        Vector a = Vector::Zero(nv);
        a(k * m + i) = -1.0 / dt;
        a((k + 1) * m + i) = 1.0 / dt_next;
        const double jump = ctrl.U(k + 1, i) - ctrl.U(k, i);
        if (std::isfinite(b.du_max)) rows.emplace_back(a, dt * b.du_max - jump);
        if (std::isfinite(b.du_min)) rows.emplace_back(-a, jump - dt * b.du_min);
      }
    }
    p.G.resize(static_cast<Index>(rows.size()), nv);
    p.h.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      p.G.row(static_cast<Index>(r)) = rows[r].first.transpose();
      p.h(static_cast<Index>(r)) = rows[r].second;
    }
  } else {
    p.G.resize(0, nv);
    p.h.resize(0);
  }
}

qp::SolverOptions qp_options(const SolverConfig& cfg) {
  qp::SolverOptions o;
  o.eps_abs = cfg.qp_tol;
  o.eps_rel = cfg.qp_tol;
  o.max_iter = cfg.qp_max_iter;
  return o;
}

// Apply a step and remove round-off excursions past the amplitude bounds
// (the QP enforces them only to its tolerance in scaled variables).
void apply_step(ControlTrajectory& ctrl, const Matrix& du, const ControlBounds& b) {
  ctrl.U += du;
  if (b.has_amplitude()) ctrl.U = ctrl.U.cwiseMax(b.u_min).cwiseMin(b.u_max);
}

Step finish_step(const ControlTrajectory& ctrl, qp::QPSolution sol) {
  const Index K = ctrl.steps();
  const Index m = ctrl.inputs();
  const Vector w = sol.z;
  Matrix du = unflatten(w, K, m);
  for (Index k = 0; k < K; ++k) du.row(k) /= ctrl.grid.dt(k);
  return Step{std::move(du), std::move(sol)};
}

// G = P H Lambda^-1.
Matrix scaled_sensitivity(const MomentSystem& ms, const Matrix& H,
                          const ControlTrajectory& ctrl) {
  MOMENTCTL_REQUIRE(H.rows() == ms.dim() &&
                        H.cols() == ctrl.steps() * ctrl.inputs(),
                    "evolution matrix must be D x mK");
  const Vector inv = lambda_weights(ctrl.grid, ctrl.inputs()).cwiseInverse();
  return (ms.P * H) * inv.asDiagonal();
}

IterationRecord make_record(int it, const MomentSystem& ms,
                            const ControlTrajectory& ctrl,
                            const StateTrajectory& traj, const Step& s,
                            double reg, Clock::time_point t0) {
  IterationRecord r;
  r.iteration = it;
  r.terminal_error = terminal_error(ms, traj);
  r.energy = control_energy(ctrl);
  r.riemann_energy = riemann_energy(ctrl);
  r.step_norm = s.qp.z.norm();
  r.regularization = reg;
  r.qp_status = s.qp.status;
  r.qp_iterations = s.qp.iterations;
  r.wall_time = seconds_since(t0);
  return r;
}

struct LoopState {
  ControlTrajectory ctrl;
  StateTrajectory traj;
  double error;
};

// Stage-1 iteration; appends records and returns the stop reason.
StopReason steer(const MomentSystem& ms, const SolverConfig& cfg,
                 LoopState& st, int max_iter,
                 std::vector<IterationRecord>& history, bool refinement) {
  const auto t0 = Clock::now();
  if (st.error <= cfg.epsilon) return StopReason::kConverged;
  double lambda = cfg.lambda0 * st.error * st.error;
  for (int it = 0; it < max_iter; ++it) {
    const auto lin = dynamics::linearize_discrete_first(ms, st.ctrl, st.traj);
    const Matrix H = dynamics::build_H(lin);
    Step s = stage1_qp(ms, st.ctrl, st.traj, H, lambda, cfg);
    if (s.qp.status == qp::Status::kInfeasible) return StopReason::kQpFailure;

    apply_step(st.ctrl, s.du, ms.bounds);
    st.traj = dynamics::simulate(ms, st.ctrl);
    st.error = terminal_error(ms, st.traj);

    IterationRecord rec = make_record(static_cast<int>(history.size()), ms,
                                      st.ctrl, st.traj, s, lambda, t0);
    rec.refinement = refinement;
    history.push_back(rec);
    if (cfg.on_iteration) cfg.on_iteration(1, rec);

    if (st.error <= cfg.epsilon) return StopReason::kConverged;
    if (rec.step_norm <= cfg.delta) return StopReason::kSmallStep;
    lambda = cfg.lambda0 * st.error * st.error;
  }
  return StopReason::kMaxIter;
}

}  // namespace

void SolverConfig::validate() const {
  MOMENTCTL_REQUIRE(epsilon > 0.0, "epsilon must be positive");
  MOMENTCTL_REQUIRE(delta > 0.0, "delta must be positive");
  MOMENTCTL_REQUIRE(lambda0 > 0.0, "lambda0 must be positive");
  MOMENTCTL_REQUIRE(mu0 > 0.0, "mu0 must be positive");
  MOMENTCTL_REQUIRE(qp_tol > 0.0, "qp_tol must be positive");
  MOMENTCTL_REQUIRE(max_iter_stage1 >= 1 && max_iter_stage2 >= 1,
                    "iteration limits must be >= 1");
  MOMENTCTL_REQUIRE(qp_max_iter >= 1, "qp_max_iter must be >= 1");
  MOMENTCTL_REQUIRE(refine_max_iter >= 1, "refine_max_iter must be >= 1");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kConverged: return "converged";
    case StopReason::kSmallStep: return "small_step";
    case StopReason::kMaxIter: return "max_iter";
    case StopReason::kQpFailure: return "qp_failure";
    case StopReason::kDriftGuard: return "drift_guard";
  }
  return "unknown";
}

Vector lambda_weights(const TimeGrid& grid, Index m) {
  Vector w(grid.steps() * m);
  for (Index k = 0; k < grid.steps(); ++k)
    for (Index i = 0; i < m; ++i) w(k * m + i) = grid.dt(k);
  return w;
}

double control_energy(const ControlTrajectory& ctrl) {
  double e = 0.0;
  for (Index k = 0; k < ctrl.steps(); ++k) {
    const double dt = ctrl.grid.dt(k);
    e += dt * dt * ctrl.U.row(k).squaredNorm();
  }
  return e;
}

double riemann_energy(const ControlTrajectory& ctrl) {
  double e = 0.0;
  for (Index k = 0; k < ctrl.steps(); ++k) {
    e += ctrl.grid.dt(k) * ctrl.U.row(k).squaredNorm();
  }
  return e;
}

double terminal_error(const MomentSystem& ms, const StateTrajectory& traj) {
  return (ms.P * (traj.terminal() - ms.xT)).norm();
}

ControlTrajectory initial_control(const MomentSystem& ms, const TimeGrid& grid,
                                  const SolverConfig& cfg) {
  const auto& ic = cfg.initial_control;
  switch (ic.kind) {
    case InitialControl::Kind::kZeros:
      return ControlTrajectory::zeros(grid, ms.m);
    case InitialControl::Kind::kConstant:
      return ControlTrajectory::constant(grid, ms.m, ic.value);
    case InitialControl::Kind::kUser: {
      ControlTrajectory c{grid, ic.values};
      c.validate(ms.m);
      return c;
    }
    case InitialControl::Kind::kAuto:
      break;
  }
  const auto& b = ms.bounds;
  if (b.u_min <= 0.0 && 0.0 <= b.u_max) {
    return ControlTrajectory::zeros(grid, ms.m);
  }
  double mid;
  if (std::isfinite(b.u_min) && std::isfinite(b.u_max)) {
    mid = 0.5 * (b.u_min + b.u_max);
  } else {
    mid = std::isfinite(b.u_min) ? b.u_min : b.u_max;
  }
  return ControlTrajectory::constant(grid, ms.m, mid);
}

Step stage1_qp(const MomentSystem& ms, const ControlTrajectory& ctrl,
               const StateTrajectory& traj, const Matrix& H, double lambda,
               const SolverConfig& cfg) {
  MOMENTCTL_REQUIRE(lambda >= 0.0, "lambda must be non-negative");
  const Matrix G = scaled_sensitivity(ms, H, ctrl);
  const Vector r = ms.P * (traj.terminal() - ms.xT);
  const Index nv = G.cols();

  qp::QProblem p;
  p.Q = 2.0 * G.transpose() * G;
  p.Q.diagonal().array() += 2.0 * lambda;
  p.Q = 0.5 * (p.Q + p.Q.transpose()).eval();
  p.q = 2.0 * G.transpose() * r;
  p.E.resize(0, nv);
  p.f.resize(0);
  add_control_constraints(p, ctrl, ms.bounds, cfg.freeze_final_interval);
  return finish_step(ctrl, qp::qp_solve(p, qp_options(cfg)));
}

Step stage1_qp(const MomentSystem& ms, const ControlTrajectory& ctrl,
               const StateTrajectory& traj,
               const dynamics::LinearizedModel& lin, double lambda,
               const SolverConfig& cfg) {
  return stage1_qp(ms, ctrl, traj, dynamics::build_H(lin), lambda, cfg);
}

Step stage2_qp(const MomentSystem& ms, const ControlTrajectory& ctrl,
               const StateTrajectory& traj, const Matrix& H, double mu,
               const SolverConfig& cfg) {
  MOMENTCTL_REQUIRE(mu >= 0.0, "mu must be non-negative");
  (void)traj;
  const Matrix G = scaled_sensitivity(ms, H, ctrl);
  const Index nv = G.cols();
  const Vector lu =
      lambda_weights(ctrl.grid, ctrl.inputs()).cwiseProduct(flatten(ctrl.U));

  qp::QProblem p;
  p.Q = (2.0 * (1.0 + mu)) * Matrix::Identity(nv, nv);
  p.q = 2.0 * lu;
  // Rows of P H that vanish identically carry no constraint.
  std::vector<Index> keep;
  for (Index i = 0; i < G.rows(); ++i)
    if (G.row(i).cwiseAbs().maxCoeff() > 0.0) keep.push_back(i);
  p.E.resize(static_cast<Index>(keep.size()), nv);
  for (std::size_t i = 0; i < keep.size(); ++i)
    p.E.row(static_cast<Index>(i)) = G.row(keep[i]);
  p.f = Vector::Zero(p.E.rows());
  add_control_constraints(p, ctrl, ms.bounds, cfg.freeze_final_interval);
  return finish_step(ctrl, qp::qp_solve(p, qp_options(cfg)));
}

Step stage2_qp(const MomentSystem& ms, const ControlTrajectory& ctrl,
               const StateTrajectory& traj,
               const dynamics::LinearizedModel& lin, double mu,
               const SolverConfig& cfg) {
  return stage2_qp(ms, ctrl, traj, dynamics::build_H(lin), mu, cfg);
}

StageResult stage1_run(const MomentSystem& ms, const TimeGrid& grid,
                       const SolverConfig& cfg) {
  cfg.validate();
  return stage1_run(ms, initial_control(ms, grid, cfg), cfg);
}

StageResult stage1_run(const MomentSystem& ms, const ControlTrajectory& start,
                       const SolverConfig& cfg) {
  cfg.validate();
  start.validate(ms.m);
  LoopState st{start, dynamics::simulate(ms, start), 0.0};
  st.error = terminal_error(ms, st.traj);

  StageResult out;
  out.report.initial_error = st.error;
  out.report.stage1_stop =
      steer(ms, cfg, st, cfg.max_iter_stage1, out.report.stage1_history, false);
  out.report.stage1_error = st.error;
  out.report.final_error = st.error;
  out.report.stage1_energy = control_energy(st.ctrl);
  out.report.final_energy = out.report.stage1_energy;
  out.report.final_control = st.ctrl;
  out.report.final_trajectory = st.traj;
  out.control = std::move(st.ctrl);
  out.trajectory = std::move(st.traj);
  return out;
}

StageResult stage2_run(const MomentSystem& ms, const StageResult& stage1,
                       const SolverConfig& cfg) {
  cfg.validate();
  StageResult out;
  out.report = stage1.report;
  out.report.stage2_history.clear();
  out.report.drift_guard_triggers = 0;

  LoopState st{stage1.control, stage1.trajectory, 0.0};
  st.error = terminal_error(ms, st.traj);
  Vector anchor = st.traj.terminal();
  double guard = 2.0 * std::max(cfg.epsilon, st.error);
  LoopState last_good = st;
  // Returned iterate: lowest energy among those meeting the stage-1 accuracy.
  const double accept_tol = std::max(cfg.epsilon, st.error);
  LoopState best = st;
  double best_energy = control_energy(st.ctrl);

  const auto t0 = Clock::now();
  double mu = cfg.mu0;
  StopReason stop = StopReason::kMaxIter;
  auto& history = out.report.stage2_history;

  for (int it = 0; it < cfg.max_iter_stage2; ++it) {
    const auto lin = dynamics::linearize_discrete_first(ms, st.ctrl, st.traj);
    const Matrix H = dynamics::build_H(lin);
    Step s = stage2_qp(ms, st.ctrl, st.traj, H, mu, cfg);
    if (s.qp.status == qp::Status::kInfeasible) {
      mu *= 10.0;
      s = stage2_qp(ms, st.ctrl, st.traj, H, mu, cfg);
      if (s.qp.status == qp::Status::kInfeasible) {
        stop = StopReason::kQpFailure;
        break;
      }
    }

    const double energy_before = control_energy(st.ctrl);
    apply_step(st.ctrl, s.du, ms.bounds);
    st.traj = dynamics::simulate(ms, st.ctrl);
    st.error = terminal_error(ms, st.traj);

    IterationRecord rec = make_record(it, ms, st.ctrl, st.traj, s, mu, t0);
    rec.energy_before = energy_before;
    rec.drift = (ms.P * (st.traj.terminal() - anchor)).norm();
    rec.guard = guard;
    const bool small_step = rec.step_norm <= cfg.delta;
    rec.guard_triggered = !small_step && st.error > guard;
    history.push_back(rec);
    if (cfg.on_iteration) cfg.on_iteration(2, rec);

    if (st.error <= accept_tol && rec.energy < best_energy) {
      best = st;
      best_energy = rec.energy;
    }
    if (small_step) {
      stop = StopReason::kSmallStep;
      break;
    }
    if (rec.step_norm <= 2.0 * cfg.delta) mu *= 0.9;

    if (rec.guard_triggered) {
      ++out.report.drift_guard_triggers;
      if (cfg.max_refinements >= 0 &&
          out.report.drift_guard_triggers > cfg.max_refinements) {
        st = last_good;
        stop = StopReason::kDriftGuard;
        break;
      }
      steer(ms, cfg, st, cfg.refine_max_iter, out.report.stage1_history, true);
      anchor = st.traj.terminal();
      guard = 2.0 * std::max(cfg.epsilon, st.error);
      const double e = control_energy(st.ctrl);
      if (st.error <= accept_tol && e < best_energy) {
        best = st;
        best_energy = e;
      }
    }
    last_good = st;
  }
  st = std::move(best);

  out.report.stage2_stop = stop;
  out.report.final_error = st.error;
  out.report.final_energy = control_energy(st.ctrl);
  out.report.final_control = st.ctrl;
  out.report.final_trajectory = st.traj;
  out.control = std::move(st.ctrl);
  out.trajectory = std::move(st.traj);
  return out;
}

StageResult synthesize(const MomentSystem& ms, const TimeGrid& grid,
                       const SolverConfig& cfg) {
  const StageResult s1 = stage1_run(ms, grid, cfg);
  return stage2_run(ms, s1, cfg);
}

}  // namespace momentctl::synth
