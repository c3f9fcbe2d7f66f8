#pragma once

#include <optional>
#include <string>

#include "momentctl/common.hpp"

namespace momentctl::qp {

/// minimize 1/2 z'Qz + q'z  subject to  G z <= h,  E z = f,  lb <= z <= ub.
///
/// Empty G/E (zero rows) and empty lb/ub (size zero) mean "absent"; entries
/// of lb/ub may be infinite.
struct QProblem {
  Matrix Q;
  Vector q;
  Matrix G;
  Vector h;
  Matrix E;
  Vector f;
  Vector lb;
  Vector ub;

  Index num_vars() const { return q.size(); }
  bool has_box() const { return lb.size() > 0 || ub.size() > 0; }
  double objective(const Eigen::Ref<const Vector>& z) const;

  /// Throws Error on inconsistent dimensions, asymmetric Q, or NaNs.
  void validate() const;
};

enum class Status { kOptimal, kMaxIter, kInfeasible };

std::string to_string(Status s);

/// Infinity-norm KKT residuals.
struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

struct QPSolution {
  Vector z;
  Status status = Status::kMaxIter;
  KktResiduals kkt;
  int iterations = 0;
  bool polished = false;
  // Multipliers for G, E (uncompressed) and box rows, sign convention
  // Qz + q + G'y_ineq + E'y_eq + y_box = 0.
  Vector y_ineq;
  Vector y_eq;
  Vector y_box;
};

struct SolverOptions {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  int scaling_iterations = 10;
  bool polish = true;
  int check_interval = 25;
  int polish_interval = 200;
  // Relative rank cutoff applied to the singular values of E.
  double equality_rank_tol = 1e-10;
  std::optional<Vector> warm_start_z;
};

/// Solve a convex QP by ADMM operator splitting with Ruiz equilibration,
/// adaptive penalty and active-set polishing. Redundant equality rows are
/// removed up front; problems without inequality rows go straight to the
/// KKT system. Deterministic for identical inputs.
QPSolution qp_solve(const QProblem& p, const SolverOptions& opts);
QPSolution qp_solve(const QProblem& p, double tol = 1e-8, int max_iter = 20000);

/// KKT residuals of z with multipliers fitted by least squares on the set of
/// constraints active within active_tol. When multiplier hints are supplied
/// the better of the fitted and hinted residuals is returned.
KktResiduals kkt_check(const QProblem& p, const Eigen::Ref<const Vector>& z,
                       double active_tol = 1e-7,
                       const QPSolution* hint = nullptr);

/// True when every residual is within eps_abs + eps_rel * (problem scale).
bool kkt_within(const QProblem& p, const Eigen::Ref<const Vector>& z,
                const KktResiduals& r, double eps_abs, double eps_rel);

}  // namespace momentctl::qp
