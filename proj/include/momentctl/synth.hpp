#pragma once

#include <functional>
#include <string>
#include <vector>

#include "momentctl/dynamics.hpp"
#include "momentctl/moments.hpp"
#include "momentctl/qp.hpp"

namespace momentctl::synth {

/// Starting nominal control. kAuto picks zeros when 0 lies inside the
/// amplitude bounds and the bound midpoint otherwise.
struct InitialControl {
  enum class Kind { kAuto, kZeros, kConstant, kUser };
  Kind kind = Kind::kAuto;
  double value = 0.0;
  Matrix values;  // K x m, for kUser
};

struct IterationRecord;

struct SolverConfig {
  double epsilon = 1e-3;  // terminal error tolerance
  double delta = 1e-8;    // step threshold on ||Lambda du||
  double lambda0 = 0.01;
  double mu0 = 0.01;
  int max_iter_stage1 = 800;
  int max_iter_stage2 = 400;
  double qp_tol = 1e-8;
  int qp_max_iter = 20000;
  InitialControl initial_control;
  // Pin the last interval's control so H effectively has m(K-1) columns.
  bool freeze_final_interval = false;
  // Iteration cap of the stage-1 pass re-entered by the stage-2 drift guard.
  int refine_max_iter = 200;
  // Stage-2 drift-guard triggers that re-enter refinement before the next
  // trigger reverts to the last iterate inside the guard and stops.
  // Negative means every trigger refines.
  int max_refinements = -1;
  // Called after every logged iteration with stage 1 or 2.
  std::function<void(int stage, const IterationRecord&)> on_iteration;

  void validate() const;
};

enum class StopReason {
  kConverged,   // ||P(x_K - x_T)|| <= epsilon
  kSmallStep,   // ||Lambda du|| <= delta
  kMaxIter,
  kQpFailure,
  kDriftGuard,  // stage 2 drift guard fired more than max_refinements times
};

std::string to_string(StopReason r);

struct IterationRecord {
  int iteration = 0;
  double terminal_error = 0.0;   // after the update
  double energy = 0.0;           // ||Lambda U||^2
  double energy_before = 0.0;    // stage 2: ||Lambda U||^2 of the iterate the step started from
  double riemann_energy = 0.0;   // sum_k dt_k ||U_k||^2
  double step_norm = 0.0;        // ||Lambda du||
  double regularization = 0.0;   // lambda (stage 1) or mu (stage 2)
  qp::Status qp_status = qp::Status::kOptimal;
  int qp_iterations = 0;
  double drift = 0.0;            // stage 2: ||P(x_K - x_K^anchor)||
  double guard = 0.0;            // stage 2: drift guard level in force for this step
  bool guard_triggered = false;  // stage 2: error exceeded `guard`, refinement follows
  double wall_time = 0.0;        // seconds since the stage started
  bool refinement = false;       // produced by a drift-guard stage-1 pass
};

struct SynthesisReport {
  std::vector<IterationRecord> stage1_history;
  std::vector<IterationRecord> stage2_history;
  StopReason stage1_stop = StopReason::kMaxIter;
  StopReason stage2_stop = StopReason::kMaxIter;
  double initial_error = 0.0;
  double stage1_error = 0.0;
  double final_error = 0.0;
  double stage1_energy = 0.0;
  double final_energy = 0.0;
  int drift_guard_triggers = 0;
  dynamics::ControlTrajectory final_control;
  dynamics::StateTrajectory final_trajectory;
};

/// Control perturbation and the QP solution it came from.
struct Step {
  Matrix du;  // K x m
  qp::QPSolution qp;
};

/// Diagonal of Lambda per stacked entry (k, i) -> dt_k.
Vector lambda_weights(const dynamics::TimeGrid& grid, Index m);

/// ||Lambda U||^2 = sum_k dt_k^2 ||U_k||^2.
double control_energy(const dynamics::ControlTrajectory& ctrl);
/// sum_k dt_k ||U_k||^2.
double riemann_energy(const dynamics::ControlTrajectory& ctrl);

/// ||P (x_K - x_T)||.
double terminal_error(const moments::MomentSystem& ms,
                      const dynamics::StateTrajectory& traj);

dynamics::ControlTrajectory initial_control(const moments::MomentSystem& ms,
                                            const dynamics::TimeGrid& grid,
                                            const SolverConfig& cfg);

/// Steering step: minimize ||P(H du + x_K - x_T)||^2 + lambda ||Lambda du||^2
/// subject to the amplitude and slew bounds on U + du.
Step stage1_qp(const moments::MomentSystem& ms,
               const dynamics::ControlTrajectory& ctrl,
               const dynamics::StateTrajectory& traj, const Matrix& H,
               double lambda, const SolverConfig& cfg);
Step stage1_qp(const moments::MomentSystem& ms,
               const dynamics::ControlTrajectory& ctrl,
               const dynamics::StateTrajectory& traj,
               const dynamics::LinearizedModel& lin, double lambda,
               const SolverConfig& cfg);

/// Energy step: minimize ||Lambda (U + du)||^2 + mu ||Lambda du||^2 subject
/// to P H du = 0 and the amplitude and slew bounds on U + du.
Step stage2_qp(const moments::MomentSystem& ms,
               const dynamics::ControlTrajectory& ctrl,
               const dynamics::StateTrajectory& traj, const Matrix& H,
               double mu, const SolverConfig& cfg);
Step stage2_qp(const moments::MomentSystem& ms,
               const dynamics::ControlTrajectory& ctrl,
               const dynamics::StateTrajectory& traj,
               const dynamics::LinearizedModel& lin, double mu,
               const SolverConfig& cfg);

struct StageResult {
  dynamics::ControlTrajectory control;
  dynamics::StateTrajectory trajectory;
  SynthesisReport report;
};

/// Steering iteration from cfg.initial_control on `grid`.
StageResult stage1_run(const moments::MomentSystem& ms,
                       const dynamics::TimeGrid& grid, const SolverConfig& cfg);
/// Steering iteration from a given nominal control.
StageResult stage1_run(const moments::MomentSystem& ms,
                       const dynamics::ControlTrajectory& start,
                       const SolverConfig& cfg);

/// Energy iteration anchored at the stage-1 terminal state. The report
/// carries over stage-1 history from `stage1`. Returns the lowest-energy
/// iterate whose terminal error is within max(epsilon, stage-1 error).
StageResult stage2_run(const moments::MomentSystem& ms,
                       const StageResult& stage1, const SolverConfig& cfg);

/// stage1_run followed by stage2_run.
StageResult synthesize(const moments::MomentSystem& ms,
                       const dynamics::TimeGrid& grid, const SolverConfig& cfg);

}  // namespace momentctl::synth
