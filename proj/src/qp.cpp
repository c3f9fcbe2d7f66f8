#include "momentctl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace momentctl::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowKind { kBox, kIneq, kEq };

// Unified form l <= A z <= u used internally.
struct RowSet {
  Matrix A;
  Vector l;
  Vector u;
  std::vector<RowKind> kind;
  std::vector<Index> source;  // variable index, G row or E row

  Index size() const { return A.rows(); }
  bool any_inequality() const {
    for (Index i = 0; i < size(); ++i)
      if (l(i) != u(i)) return true;
    return false;
  }
};

double inf_norm(const Eigen::Ref<const Vector>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

double finite_inf_norm(const Vector& v) {
  double out = 0.0;
  for (Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) out = std::max(out, std::abs(v(i)));
  return out;
}

double lower_of(const QProblem& p, Index j) {
  return p.lb.size() ? p.lb(j) : -kInf;
}
double upper_of(const QProblem& p, Index j) {
  return p.ub.size() ? p.ub(j) : kInf;
}

// Box and G rows shared by the solver and by kkt_check.
void append_box_and_ineq(const QProblem& p, std::vector<Vector>& rows,
                         std::vector<double>& lo, std::vector<double>& hi,
                         std::vector<RowKind>& kind,
                         std::vector<Index>& source) {
  const Index n = p.num_vars();
  for (Index j = 0; j < n; ++j) {
    const double l = lower_of(p, j);
    const double u = upper_of(p, j);
    if (!std::isfinite(l) && !std::isfinite(u)) continue;
    rows.push_back(Vector::Unit(n, j));
    lo.push_back(l);
    hi.push_back(u);
    kind.push_back(RowKind::kBox);
    source.push_back(j);
  }
  for (Index i = 0; i < p.G.rows(); ++i) {
    rows.push_back(p.G.row(i).transpose());
    lo.push_back(-kInf);
    hi.push_back(p.h(i));
    kind.push_back(RowKind::kIneq);
    source.push_back(i);
  }
}

RowSet assemble(Index n, const std::vector<Vector>& rows,
                const std::vector<double>& lo, const std::vector<double>& hi,
                std::vector<RowKind> kind, std::vector<Index> source) {
  RowSet rs;
  const Index m = static_cast<Index>(rows.size());
  rs.A.resize(m, n);
  rs.l.resize(m);
  rs.u.resize(m);
  for (Index i = 0; i < m; ++i) {
    rs.A.row(i) = rows[i].transpose();
    rs.l(i) = lo[i];
    rs.u(i) = hi[i];
  }
  rs.kind = std::move(kind);
  rs.source = std::move(source);
  return rs;
}

RowSet original_rows(const QProblem& p) {
  std::vector<Vector> rows;
  std::vector<double> lo, hi;
  std::vector<RowKind> kind;
  std::vector<Index> source;
  append_box_and_ineq(p, rows, lo, hi, kind, source);
  for (Index i = 0; i < p.E.rows(); ++i) {
    rows.push_back(p.E.row(i).transpose());
    lo.push_back(p.f(i));
    hi.push_back(p.f(i));
    kind.push_back(RowKind::kEq);
    source.push_back(i);
  }
  return assemble(p.num_vars(), rows, lo, hi, std::move(kind),
                  std::move(source));
}

// E z = f replaced by an equivalent full-row-rank system V' z = c with
// V' = S^-1 U' E. `lift` maps multipliers of the compressed rows back to
// multipliers of the original rows.
struct CompressedEq {
  Matrix rows;  // r x n
  Vector rhs;
  Matrix lift;  // p x r
  bool consistent = true;
};

CompressedEq compress_equalities(const QProblem& p, double rank_tol) {
  CompressedEq out;
  const Index n = p.num_vars();
  if (p.E.rows() == 0) {
    out.rows.resize(0, n);
    out.rhs.resize(0);
    out.lift.resize(0, 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(p.E, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Index r = 0;
  const double cutoff = rank_tol * (s.size() ? s(0) : 0.0);
  while (r < s.size() && s(r) > cutoff && s(r) > 0.0) ++r;

  const Matrix Ur = svd.matrixU().leftCols(r);
  const Vector sinv = s.head(r).cwiseInverse();
  out.rows = svd.matrixV().leftCols(r).transpose();
  out.rhs = sinv.asDiagonal() * (Ur.transpose() * p.f);
  out.lift = Ur * sinv.asDiagonal();
  const Vector resid = p.f - Ur * (Ur.transpose() * p.f);
  out.consistent = inf_norm(resid) <= 1e-9 * (1.0 + inf_norm(p.f));
  return out;
}

struct Multipliers {
  Vector box;
  Vector ineq;
  Vector eq;
};

KktResiduals residuals_with(const QProblem& p, const RowSet& rows,
                            const Vector& z, const Vector& y) {
  KktResiduals r;
  const Vector Az = rows.A * z;
  Vector g = p.Q * z + p.q;
  if (rows.size()) g += rows.A.transpose() * y;
  r.stationarity = inf_norm(g);
  for (Index i = 0; i < rows.size(); ++i) {
    const double viol = std::max({Az(i) - rows.u(i), rows.l(i) - Az(i), 0.0});
    r.primal = std::max(r.primal, viol);
    if (rows.l(i) == rows.u(i)) continue;
    // y > 0 pairs with the upper side, y < 0 with the lower side.
    if (y(i) > 0.0) {
      if (!std::isfinite(rows.u(i))) {
        r.dual = std::max(r.dual, y(i));
      } else {
        r.complementarity =
            std::max(r.complementarity, y(i) * std::abs(rows.u(i) - Az(i)));
      }
    } else if (y(i) < 0.0) {
      if (!std::isfinite(rows.l(i))) {
        r.dual = std::max(r.dual, -y(i));
      } else {
        r.complementarity =
            std::max(r.complementarity, -y(i) * std::abs(Az(i) - rows.l(i)));
      }
    }
  }
  return r;
}

Vector hint_row_multipliers(const RowSet& rows, const QPSolution& hint) {
  Vector y = Vector::Zero(rows.size());
  for (Index i = 0; i < rows.size(); ++i) {
    const Index s = rows.source[i];
    switch (rows.kind[i]) {
      case RowKind::kBox:
        if (s < hint.y_box.size()) y(i) = hint.y_box(s);
        break;
      case RowKind::kIneq:
        if (s < hint.y_ineq.size()) y(i) = hint.y_ineq(s);
        break;
      case RowKind::kEq:
        if (s < hint.y_eq.size()) y(i) = hint.y_eq(s);
        break;
    }
  }
  return y;
}

// Exact solve of min 1/2 x'Qx + q'x s.t. A x = b using a Cholesky factor of
// Q, a lightly regularized Schur complement and iterative refinement.
struct EqualitySolve {
  Vector x;
  Vector y;
  bool ok = false;
};

EqualitySolve solve_equality_kkt(const Eigen::LLT<Matrix>& Qfac,
                                 const Matrix& Q, const Vector& q,
                                 const Matrix& A, const Vector& b) {
  EqualitySolve out;
  const Index n = Q.rows();
  const Index m = A.rows();
  if (m == 0) {
    out.x = Qfac.solve(-q);
    out.y = Vector(0);
    for (int it = 0; it < 3; ++it) out.x += Qfac.solve(-q - Q * out.x);
    out.ok = out.x.allFinite();
    return out;
  }
  const Matrix QinvAt = Qfac.solve(A.transpose());
  Matrix S = A * QinvAt;
  const double reg =
      1e-12 * std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
  S.diagonal().array() += reg;
  Eigen::LLT<Matrix> Sfac(S);
  if (Sfac.info() != Eigen::Success) return out;

  auto solve_reg = [&](const Vector& r1, const Vector& r2, Vector& dx,
                       Vector& dy) {
    const Vector Qr1 = Qfac.solve(r1);
    dy = Sfac.solve(A * Qr1 - r2);
    dx = Qr1 - QinvAt * dy;
  };

  out.x = Vector::Zero(n);
  out.y = Vector::Zero(m);
  Vector dx, dy;
  solve_reg(-q, b, dx, dy);
  out.x = dx;
  out.y = dy;
  for (int it = 0; it < 20; ++it) {
    const Vector r1 = -q - Q * out.x - A.transpose() * out.y;
    const Vector r2 = b - A * out.x;
    if (std::max(inf_norm(r1), inf_norm(r2)) <= 1e-15 * (1.0 + inf_norm(q) + inf_norm(b))) break;
    solve_reg(r1, r2, dx, dy);
    out.x += dx;
    out.y += dy;
  }
  out.ok = out.x.allFinite() && out.y.allFinite();
  return out;
}

class AdmmSolver {
 public:
  AdmmSolver(const QProblem& p, const Matrix& Q, const RowSet& rows,
             const SolverOptions& opts)
      : p_(p), Q_(Q), rows_(rows), opts_(opts) {}

  QPSolution run(const CompressedEq& ceq);

 private:
  void scale();
  void set_rho(double rho);
  void factor();
  void unscale(Vector& x, Vector& z, Vector& y) const;
  bool try_polish(const Vector& x, const Vector& z, const Vector& y,
                  const CompressedEq& ceq, QPSolution& best);
  QPSolution package(const Vector& x, const Vector& y,
                     const CompressedEq& ceq) const;

  const QProblem& p_;
  const Matrix& Q_;
  const RowSet& rows_;
  SolverOptions opts_;

  Matrix Qs_, As_;
  Vector qs_, ls_, us_;
  Vector D_, Einv_, E_;
  double c_ = 1.0;
  double rho_ = 0.1;
  Vector rho_vec_;
  Eigen::LLT<Matrix> kkt_;
  std::optional<Eigen::LLT<Matrix>> qfac_;
};

void AdmmSolver::scale() {
  const Index n = Q_.rows();
  const Index m = rows_.size();
  Qs_ = Q_;
  As_ = rows_.A;
  qs_ = p_.q;
  D_ = Vector::Ones(n);
  E_ = Vector::Ones(m);
  c_ = 1.0;
  auto clamp_scale = [](double v) {
    if (v < 1e-4) return 1.0;
    return std::min(v, 1e4);
  };
  for (int it = 0; it < opts_.scaling_iterations; ++it) {
    Vector dcol(n), erow(m);
    for (Index j = 0; j < n; ++j) {
      double v = Qs_.col(j).cwiseAbs().maxCoeff();
      if (m) v = std::max(v, As_.col(j).cwiseAbs().maxCoeff());
      dcol(j) = 1.0 / std::sqrt(clamp_scale(v));
    }
    for (Index i = 0; i < m; ++i) {
      erow(i) = 1.0 / std::sqrt(clamp_scale(As_.row(i).cwiseAbs().maxCoeff()));
    }
    Qs_ = dcol.asDiagonal() * Qs_ * dcol.asDiagonal();
    if (m) As_ = erow.asDiagonal() * As_ * dcol.asDiagonal();
    qs_ = dcol.cwiseProduct(qs_);
    D_ = D_.cwiseProduct(dcol);
    E_ = E_.cwiseProduct(erow);

    const double mean_col = Qs_.cwiseAbs().colwise().maxCoeff().mean();
    const double cost = 1.0 / clamp_scale(std::max(mean_col, inf_norm(qs_)));
    Qs_ *= cost;
    qs_ *= cost;
    c_ *= cost;
  }
  ls_ = E_.cwiseProduct(rows_.l);
  us_ = E_.cwiseProduct(rows_.u);
  for (Index i = 0; i < m; ++i) {
    if (!std::isfinite(rows_.l(i))) ls_(i) = -kInf;
    if (!std::isfinite(rows_.u(i))) us_(i) = kInf;
  }
  Einv_ = E_.cwiseInverse();
}

void AdmmSolver::set_rho(double rho) {
  rho_ = std::clamp(rho, 1e-6, 1e6);
  const Index m = rows_.size();
  rho_vec_.resize(m);
  for (Index i = 0; i < m; ++i) {
    if (!std::isfinite(ls_(i)) && !std::isfinite(us_(i))) {
      rho_vec_(i) = 1e-6;
    } else if (ls_(i) == us_(i)) {
      rho_vec_(i) = 1e3 * rho_;
    } else {
      rho_vec_(i) = rho_;
    }
  }
}

void AdmmSolver::factor() {
  Matrix M = Qs_;
  M.diagonal().array() += opts_.sigma;
  M.noalias() += As_.transpose() * rho_vec_.asDiagonal() * As_;
  kkt_.compute(M);
  MOMENTCTL_REQUIRE(kkt_.info() == Eigen::Success,
                    "ADMM system matrix is not positive definite");
}

void AdmmSolver::unscale(Vector& x, Vector& z, Vector& y) const {
  x = D_.cwiseProduct(x);
  z = Einv_.cwiseProduct(z);
  y = E_.cwiseProduct(y) / c_;
}

QPSolution AdmmSolver::package(const Vector& x, const Vector& y,
                               const CompressedEq& ceq) const {
  QPSolution sol;
  sol.z = x;
  sol.y_box = Vector::Zero(p_.num_vars());
  sol.y_ineq = Vector::Zero(p_.G.rows());
  Vector yc = Vector::Zero(ceq.rows.rows());
  for (Index i = 0; i < rows_.size(); ++i) {
    const Index s = rows_.source[i];
    switch (rows_.kind[i]) {
      case RowKind::kBox: sol.y_box(s) = y(i); break;
      case RowKind::kIneq: sol.y_ineq(s) = y(i); break;
      case RowKind::kEq: yc(s) = y(i); break;
    }
  }
  sol.y_eq = ceq.lift.size() ? Vector(ceq.lift * yc) : Vector::Zero(p_.E.rows());
  return sol;
}

bool AdmmSolver::try_polish(const Vector& /*x*/, const Vector& z, const Vector& y,
                            const CompressedEq& ceq, QPSolution& best) {
  if (!qfac_) {
    qfac_.emplace(Q_);
    if (qfac_->info() != Eigen::Success) return false;
  }
  std::vector<Index> active;
  std::vector<double> target;
  for (Index i = 0; i < rows_.size(); ++i) {
    const double l = rows_.l(i);
    const double u = rows_.u(i);
    if (l == u) {
      active.push_back(i);
      target.push_back(l);
    } else if (std::isfinite(l) && z(i) - l < -y(i)) {
      active.push_back(i);
      target.push_back(l);
    } else if (std::isfinite(u) && u - z(i) < y(i)) {
      active.push_back(i);
      target.push_back(u);
    }
  }
  const Index na = static_cast<Index>(active.size());
  Matrix Aact(na, Q_.rows());
  Vector bact(na);
  for (Index k = 0; k < na; ++k) {
    Aact.row(k) = rows_.A.row(active[k]);
    bact(k) = target[k];
  }
  const EqualitySolve es = solve_equality_kkt(*qfac_, Q_, p_.q, Aact, bact);
  if (!es.ok) return false;

  Vector yfull = Vector::Zero(rows_.size());
  for (Index k = 0; k < na; ++k) yfull(active[k]) = es.y(k);
  QPSolution cand = package(es.x, yfull, ceq);
  cand.kkt = kkt_check(p_, cand.z, 1e-7, &cand);
  cand.polished = true;
  cand.status = Status::kOptimal;
  if (!kkt_within(p_, cand.z, cand.kkt, opts_.eps_abs, opts_.eps_rel)) {
    return false;
  }
  best = std::move(cand);
  return true;
}

QPSolution AdmmSolver::run(const CompressedEq& ceq) {
  scale();
  set_rho(opts_.rho);
  factor();

  const Index n = Q_.rows();
  const Index m = rows_.size();
  Vector x = Vector::Zero(n);
  if (opts_.warm_start_z && opts_.warm_start_z->size() == n) {
    x = D_.cwiseInverse().cwiseProduct(*opts_.warm_start_z);
  }
  Vector z = (As_ * x).cwiseMax(ls_).cwiseMin(us_);
  Vector y = Vector::Zero(m);
  const double alpha = opts_.relaxation;

  QPSolution best;
  bool infeasible = false;
  int iter = 0;
  Vector xu, zu, yu;

  for (iter = 1; iter <= opts_.max_iter; ++iter) {
    const Vector rhs =
        opts_.sigma * x - qs_ + As_.transpose() * (rho_vec_.cwiseProduct(z) - y);
    const Vector xt = kkt_.solve(rhs);
    const Vector zt = As_ * xt;
    const Vector x_new = alpha * xt + (1.0 - alpha) * x;
    const Vector zr = alpha * zt + (1.0 - alpha) * z;
    Vector z_new = (zr + y.cwiseQuotient(rho_vec_)).cwiseMax(ls_).cwiseMin(us_);
    const Vector dy = rho_vec_.cwiseProduct(zr - z_new);
    x = x_new;
    z = std::move(z_new);
    y += dy;

    const bool check = (iter % opts_.check_interval == 0) || iter == opts_.max_iter;
    if (!check) continue;

    xu = x;
    zu = z;
    yu = y;
    unscale(xu, zu, yu);
    const Vector Ax = rows_.A * xu;
    const Vector Qx = Q_ * xu;
    const Vector Aty = rows_.A.transpose() * yu;
    const double r_prim = inf_norm(Ax - zu);
    const double r_dual = inf_norm(Qx + p_.q + Aty);
    const double eps_prim =
        opts_.eps_abs + opts_.eps_rel * std::max(inf_norm(Ax), inf_norm(zu));
    const double eps_dual =
        opts_.eps_abs +
        opts_.eps_rel * std::max({inf_norm(Qx), inf_norm(Aty), inf_norm(p_.q)});
    const bool converged = r_prim <= eps_prim && r_dual <= eps_dual;

    if (opts_.polish && (converged || iter % opts_.polish_interval == 0)) {
      if (try_polish(xu, zu, yu, ceq, best)) {
        best.iterations = iter;
        return best;
      }
    }
    if (converged) break;

    // Primal infeasibility certificate from the dual increment.
    const Vector dyu = E_.cwiseProduct(dy);
    const double dy_norm = inf_norm(dyu);
    if (dy_norm > 1e-12) {
      const double eps_pinf = 1e-9;
      const double aty = inf_norm(rows_.A.transpose() * dyu);
      double support = 0.0;
      bool finite_support = true;
      for (Index i = 0; i < m; ++i) {
        if (dyu(i) > 0.0) {
          if (!std::isfinite(rows_.u(i))) { finite_support = false; break; }
          support += rows_.u(i) * dyu(i);
        } else if (dyu(i) < 0.0) {
          if (!std::isfinite(rows_.l(i))) { finite_support = false; break; }
          support += rows_.l(i) * dyu(i);
        }
      }
      if (finite_support && aty <= eps_pinf * dy_norm &&
          support <= -eps_pinf * dy_norm) {
        infeasible = true;
        break;
      }
    }

    // Penalty adaptation balancing the scaled residuals.
    const Vector Asx = As_ * x;
    const double prim_s = inf_norm(Asx - z) /
                          std::max({inf_norm(Asx), inf_norm(z), 1e-30});
    const double dual_s =
        inf_norm(Qs_ * x + qs_ + As_.transpose() * y) /
        std::max({inf_norm(Qs_ * x), inf_norm(As_.transpose() * y),
                  inf_norm(qs_), 1e-30});
    if (dual_s > 0.0 && prim_s > 0.0) {
      const double rho_new = rho_ * std::sqrt(prim_s / dual_s);
      if (rho_new > 5.0 * rho_ || rho_new < 0.2 * rho_) {
        set_rho(rho_new);
        factor();
      }
    }
  }

  xu = x;
  zu = z;
  yu = y;
  unscale(xu, zu, yu);
  if (!infeasible && opts_.polish && try_polish(xu, zu, yu, ceq, best)) {
    best.iterations = std::min(iter, opts_.max_iter);
    return best;
  }
  QPSolution sol = package(xu, yu, ceq);
  sol.iterations = std::min(iter, opts_.max_iter);
  sol.kkt = kkt_check(p_, sol.z, 1e-7, &sol);
  if (infeasible) {
    sol.status = Status::kInfeasible;
  } else if (kkt_within(p_, sol.z, sol.kkt, opts_.eps_abs, opts_.eps_rel)) {
    sol.status = Status::kOptimal;
  } else {
    sol.status = Status::kMaxIter;
  }
  return sol;
}

QPSolution infeasible_solution(const QProblem& p) {
  QPSolution sol;
  sol.z = Vector::Zero(p.num_vars());
  sol.status = Status::kInfeasible;
  sol.y_box = Vector::Zero(p.num_vars());
  sol.y_ineq = Vector::Zero(p.G.rows());
  sol.y_eq = Vector::Zero(p.E.rows());
  sol.kkt = kkt_check(p, sol.z);
  return sol;
}

}  // namespace

double QProblem::objective(const Eigen::Ref<const Vector>& z) const {
  return 0.5 * z.dot(Q * z) + q.dot(z);
}

void QProblem::validate() const {
  const Index n = q.size();
  MOMENTCTL_REQUIRE(n > 0, "QP needs at least one variable");
  MOMENTCTL_REQUIRE(Q.rows() == n && Q.cols() == n, "Q must be n x n");
  MOMENTCTL_REQUIRE(Q.allFinite() && q.allFinite(), "QP objective must be finite");
  const double asym = (Q - Q.transpose()).cwiseAbs().maxCoeff();
  MOMENTCTL_REQUIRE(asym <= 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()),
                    "Q must be symmetric");
  MOMENTCTL_REQUIRE(G.rows() == h.size() && (G.rows() == 0 || G.cols() == n),
                    "inequality system dimensions inconsistent");
  MOMENTCTL_REQUIRE(E.rows() == f.size() && (E.rows() == 0 || E.cols() == n),
                    "equality system dimensions inconsistent");
  MOMENTCTL_REQUIRE(G.allFinite() && E.allFinite() && f.allFinite(),
                    "constraint matrices must be finite");
  MOMENTCTL_REQUIRE(!h.hasNaN(), "inequality bounds must not be NaN");
  MOMENTCTL_REQUIRE(lb.size() == 0 || lb.size() == n, "lb must be empty or n");
  MOMENTCTL_REQUIRE(ub.size() == 0 || ub.size() == n, "ub must be empty or n");
  MOMENTCTL_REQUIRE(!lb.hasNaN() && !ub.hasNaN(), "box bounds must not be NaN");
}

std::string to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kMaxIter: return "max_iter";
    case Status::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

KktResiduals kkt_check(const QProblem& p, const Eigen::Ref<const Vector>& z,
                       double active_tol, const QPSolution* hint) {
  MOMENTCTL_REQUIRE(z.size() == p.num_vars(), "z has wrong dimension");
  const RowSet rows = original_rows(p);
  const Vector zz = z;
  const Vector Az = rows.A * zz;
  const Vector g = p.Q * zz + p.q;

  // Active set: equalities plus inequalities within active_tol of a bound.
  std::vector<Index> active;
  std::vector<int> side;
  for (Index i = 0; i < rows.size(); ++i) {
    const double l = rows.l(i);
    const double u = rows.u(i);
    if (l == u) {
      active.push_back(i);
      side.push_back(0);
      continue;
    }
    const double su = std::isfinite(u) ? u - Az(i) : kInf;
    const double sl = std::isfinite(l) ? Az(i) - l : kInf;
    if (su <= active_tol * (1.0 + std::abs(u)) && su <= sl) {
      active.push_back(i);
      side.push_back(1);
    } else if (sl <= active_tol * (1.0 + std::abs(l))) {
      active.push_back(i);
      side.push_back(-1);
    }
  }

  Vector y = Vector::Zero(rows.size());
  if (!active.empty()) {
    const Index na = static_cast<Index>(active.size());
    Matrix At(p.num_vars(), na);
    for (Index k = 0; k < na; ++k) At.col(k) = rows.A.row(active[k]).transpose();
    const Vector ya = At.completeOrthogonalDecomposition().solve(-g);
    // Wrong-signed multipliers are kept and reported as dual residual.
    for (Index k = 0; k < na; ++k) y(active[k]) = ya(k);
  }

  KktResiduals fitted = residuals_with(p, rows, zz, y);
  // residuals_with assigns signs by which side is finite; for two-sided rows
  // a multiplier whose sign disagrees with the active side is a dual error.
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Index i = active[k];
    if (side[k] == 1 && y(i) < 0.0) fitted.dual = std::max(fitted.dual, -y(i));
    if (side[k] == -1 && y(i) > 0.0) fitted.dual = std::max(fitted.dual, y(i));
  }

  if (hint != nullptr) {
    const Vector yh = hint_row_multipliers(rows, *hint);
    const KktResiduals hinted = residuals_with(p, rows, zz, yh);
    if (hinted.max() < fitted.max()) return hinted;
  }
  return fitted;
}

bool kkt_within(const QProblem& p, const Eigen::Ref<const Vector>& z,
                const KktResiduals& r, double eps_abs, double eps_rel) {
  const Vector zz = z;
  const double stat_scale = std::max(inf_norm(p.Q * zz), inf_norm(p.q));
  double prim_scale = std::max(finite_inf_norm(p.lb), finite_inf_norm(p.ub));
  if (p.G.rows()) {
    prim_scale = std::max({prim_scale, inf_norm(p.G * zz), finite_inf_norm(p.h)});
  }
  if (p.E.rows()) {
    prim_scale = std::max({prim_scale, inf_norm(p.E * zz), inf_norm(p.f)});
  }
  const double scale = std::max(stat_scale, prim_scale);
  return r.stationarity <= eps_abs + eps_rel * stat_scale &&
         r.primal <= eps_abs + eps_rel * prim_scale &&
         r.dual <= eps_abs + eps_rel * scale &&
         r.complementarity <= eps_abs + eps_rel * scale;
}

QPSolution qp_solve(const QProblem& p, double tol, int max_iter) {
  SolverOptions opts;
  opts.eps_abs = tol;
  opts.eps_rel = tol;
  opts.max_iter = max_iter;
  return qp_solve(p, opts);
}

QPSolution qp_solve(const QProblem& p, const SolverOptions& opts) {
  p.validate();
  MOMENTCTL_REQUIRE(opts.max_iter >= 1, "max_iter must be >= 1");
  const Index n = p.num_vars();

  for (Index j = 0; j < n; ++j) {
    if (lower_of(p, j) > upper_of(p, j)) return infeasible_solution(p);
  }

  const CompressedEq ceq = compress_equalities(p, opts.equality_rank_tol);
  if (!ceq.consistent) return infeasible_solution(p);

  // Ridge when Q is (numerically) singular.
  Matrix Q = p.Q;
  {
    Eigen::LDLT<Matrix> ldlt(Q);
    const double min_pivot =
        ldlt.info() == Eigen::Success ? ldlt.vectorD().minCoeff() : -1.0;
    if (!(min_pivot >= 1e-12)) Q.diagonal().array() += 1e-10;
  }

  std::vector<Vector> rows;
  std::vector<double> lo, hi;
  std::vector<RowKind> kind;
  std::vector<Index> source;
  append_box_and_ineq(p, rows, lo, hi, kind, source);
  for (Index i = 0; i < ceq.rows.rows(); ++i) {
    rows.push_back(ceq.rows.row(i).transpose());
    lo.push_back(ceq.rhs(i));
    hi.push_back(ceq.rhs(i));
    kind.push_back(RowKind::kEq);
    source.push_back(i);
  }
  const RowSet rs = assemble(n, rows, lo, hi, std::move(kind), std::move(source));

  if (!rs.any_inequality()) {
    Eigen::LLT<Matrix> qfac(Q);
    MOMENTCTL_REQUIRE(qfac.info() == Eigen::Success,
                      "QP objective is not positive definite");
    const EqualitySolve es = solve_equality_kkt(qfac, Q, p.q, rs.A, rs.l);
    QPSolution sol;
    sol.z = es.x;
    sol.y_box = Vector::Zero(n);
    sol.y_ineq = Vector::Zero(p.G.rows());
    Vector yc = Vector::Zero(ceq.rows.rows());
    for (Index i = 0; i < rs.size(); ++i) {
      if (rs.kind[i] == RowKind::kEq) yc(rs.source[i]) = es.y(i);
      else if (rs.kind[i] == RowKind::kBox) sol.y_box(rs.source[i]) = es.y(i);
    }
    sol.y_eq = ceq.lift.size() ? Vector(ceq.lift * yc) : Vector::Zero(p.E.rows());
    sol.polished = true;
    sol.kkt = kkt_check(p, sol.z, 1e-7, &sol);
    sol.status = kkt_within(p, sol.z, sol.kkt, opts.eps_abs, opts.eps_rel)
                     ? Status::kOptimal
                     : Status::kMaxIter;
    return sol;
  }

  AdmmSolver solver(p, Q, rs, opts);
  return solver.run(ceq);
}

}  // namespace momentctl::qp
