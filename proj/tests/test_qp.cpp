#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "momentctl/qp.hpp"
#include "qp_oracle.hpp"

using namespace momentctl;
using namespace momentctl::qp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QProblem unconstrained(Index n) {
  QProblem p;
  p.Q = Matrix::Identity(n, n);
  p.q = Vector::Zero(n);
  return p;
}

}  // namespace

TEST(Qp, UnconstrainedMinimum) {
  QProblem p = unconstrained(4);
  p.q.setConstant(-2.0);
  const auto s = qp_solve(p);
  EXPECT_EQ(s.status, Status::kOptimal);
  EXPECT_LT((s.z - Vector::Constant(4, 2.0)).norm(), 1e-10);
  // z = -Q^{-1} q = 2 for Q = I, q = -2; for Q = 2I the minimum is 1.
  p.Q *= 2.0;
  EXPECT_LT((qp_solve(p).z - Vector::Ones(4)).norm(), 1e-10);
}

TEST(Qp, ClippedByBox) {
  QProblem p = unconstrained(3);
  p.lb = Vector::Ones(3);
  p.ub = Vector::Constant(3, 2.0);
  const auto s = qp_solve(p);
  EXPECT_EQ(s.status, Status::kOptimal);
  EXPECT_LT((s.z - Vector::Ones(3)).norm(), 1e-8);
  EXPECT_LE(s.kkt.max(), 1e-8);
}

TEST(Qp, MatchesEnumerationOracle) {
  std::mt19937 gen(2024);
  int n_checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 6;
    const Index cons = trial % 5;
    const QProblem p = oracle::random_qp(gen, n, cons, trial % 3 == 0);
    const auto ref = oracle::qp_enumerate(p);
    ASSERT_TRUE(ref.has_value()) << trial;
    const auto s = qp_solve(p);
    ASSERT_EQ(s.status, Status::kOptimal) << trial;
    EXPECT_LT((s.z - *ref).cwiseAbs().maxCoeff(), 1e-7) << trial;
    EXPECT_LE(s.kkt.max(), 1e-8) << trial;
    ++n_checked;
  }
  EXPECT_EQ(n_checked, 200);
}

TEST(Qp, BeatsRandomFeasiblePoints) {
  std::mt19937 gen(77);
  const QProblem p = oracle::random_qp(gen, 4, 3, true);
  const auto s = qp_solve(p);
  ASSERT_EQ(s.status, Status::kOptimal);
  const double fstar = p.objective(s.z);
  std::normal_distribution<double> nd;
  int feasible = 0;
  for (int i = 0; i < 200000 && feasible < 1000; ++i) {
    Vector z = s.z + Vector::NullaryExpr(4, [&] { return nd(gen); });
    if (p.E.rows() > 0) {
      // Project onto the affine equality set.
      z -= p.E.transpose() * (p.E * p.E.transpose()).ldlt().solve(p.E * z - p.f);
    }
    if ((p.G * z - p.h).maxCoeff() > 0) continue;
    if (((z - p.lb).array() < 0).any() || ((p.ub - z).array() < 0).any()) continue;
    ++feasible;
    EXPECT_LT(fstar, p.objective(z));
  }
  EXPECT_EQ(feasible, 1000);
}

TEST(Qp, EqualityOnlyKktResiduals) {
  std::mt19937 gen(5);
  std::normal_distribution<double> nd;
  QProblem p;
  const Matrix M = Matrix::NullaryExpr(5, 5, [&] { return nd(gen); });
  p.Q = M.transpose() * M + Matrix::Identity(5, 5);
  p.q = Vector::NullaryExpr(5, [&] { return nd(gen); });
  p.E = Matrix::NullaryExpr(2, 5, [&] { return nd(gen); });
  p.f = Vector::NullaryExpr(2, [&] { return nd(gen); });
  Matrix K = Matrix::Zero(7, 7);
  K.topLeftCorner(5, 5) = p.Q;
  K.topRightCorner(5, 2) = p.E.transpose();
  K.bottomLeftCorner(2, 5) = p.E;
  Vector r(7);
  r << -p.q, p.f;
  const Vector z = K.fullPivLu().solve(r).head(5);
  EXPECT_LE(kkt_check(p, z).max(), 1e-10);
  const auto s = qp_solve(p);
  EXPECT_LT((s.z - z).norm(), 1e-9);

  // Stationarity grows linearly with a perturbation along the null space of E.
  Eigen::FullPivLU<Matrix> lu(p.E);
  const Vector dir = lu.kernel().col(0).normalized();
  const double r1 = kkt_check(p, z + 1e-4 * dir).stationarity;
  const double r2 = kkt_check(p, z + 2e-4 * dir).stationarity;
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r2 / r1, 2.0, 1e-3);
}

TEST(Qp, PrimalResidualIsMaxViolation) {
  QProblem p = unconstrained(2);
  p.G = Matrix::Ones(1, 2);
  p.h = Vector::Constant(1, 1.0);
  p.ub = Vector::Constant(2, 0.25);
  p.lb = Vector::Constant(2, -kInf);
  Vector z(2);
  z << 0.6, 0.5;  // G z - h = 0.1, box violation 0.35
  EXPECT_NEAR(kkt_check(p, z).primal, 0.35, 1e-15);
}

TEST(Qp, RankDeficientEqualities) {
  QProblem p = unconstrained(3);
  p.q << 1.0, -2.0, 0.5;
  p.E.resize(3, 3);
  p.E << 1, 1, 0, 2, 2, 0, 0, 1, 1;  // rows 0 and 1 are parallel
  p.f = Vector(3);
  p.f << 1.0, 2.0, 0.0;
  p.lb = Vector::Constant(3, -0.8);
  p.ub = Vector::Constant(3, kInf);
  const auto s = qp_solve(p);
  ASSERT_EQ(s.status, Status::kOptimal);
  QProblem reduced = p;
  reduced.E = p.E({0, 2}, Eigen::all);
  reduced.f = p.f({0, 2});
  const auto ref = oracle::qp_enumerate(reduced);
  ASSERT_TRUE(ref);
  EXPECT_LT((s.z - *ref).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Qp, InfeasibleReported) {
  QProblem p = unconstrained(2);
  p.G.resize(2, 2);
  p.G << 1, 0, -1, 0;  // z0 <= -1 and z0 >= 1
  p.h = Vector(2);
  p.h << -1.0, -1.0;
  const auto s = qp_solve(p);
  EXPECT_EQ(s.status, Status::kInfeasible);

  QProblem q = unconstrained(2);
  q.E.resize(2, 2);
  q.E << 1, 1, 2, 2;
  q.f = Vector(2);
  q.f << 1.0, 3.0;  // inconsistent parallel rows
  EXPECT_EQ(qp_solve(q).status, Status::kInfeasible);

  QProblem b = unconstrained(1);
  b.lb = Vector::Constant(1, 2.0);
  b.ub = Vector::Constant(1, 1.0);
  EXPECT_EQ(qp_solve(b).status, Status::kInfeasible);
}

TEST(Qp, ScalingEquivarianceAndWarmStart) {
  std::mt19937 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    QProblem p = oracle::random_qp(gen, 5, 4, true);
    const auto s = qp_solve(p);
    ASSERT_EQ(s.status, Status::kOptimal);
    QProblem sp = p;
    sp.Q *= 37.0;
    sp.q *= 37.0;
    EXPECT_LT((qp_solve(sp).z - s.z).cwiseAbs().maxCoeff(), 1e-7);
    SolverOptions o;
    o.warm_start_z = s.z + 0.01 * Vector::Ones(5);
    const auto w = qp_solve(p, o);
    EXPECT_LT((w.z - s.z).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Qp, Deterministic) {
  std::mt19937 gen(8);
  const QProblem p = oracle::random_qp(gen, 6, 4, true);
  const auto a = qp_solve(p);
  const auto b = qp_solve(p);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Qp, ValidationErrors) {
  QProblem p = unconstrained(2);
  p.Q(0, 1) = 1.0;
  EXPECT_THROW(qp_solve(p), Error);
  QProblem q = unconstrained(2);
  q.G = Matrix::Ones(1, 3);
  q.h = Vector::Ones(1);
  EXPECT_THROW(qp_solve(q), Error);
  QProblem r = unconstrained(2);
  r.lb = Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(qp_solve(r), Error);
}

TEST(Qp, MaxIterReturnsIterate) {
  std::mt19937 gen(3);
  const QProblem p = oracle::random_qp(gen, 6, 4, true);
  SolverOptions o;
  o.max_iter = 2;
  o.polish = false;
  const auto s = qp_solve(p, o);
  EXPECT_EQ(s.status, Status::kMaxIter);
  EXPECT_EQ(s.z.size(), 6);
  EXPECT_TRUE(s.z.allFinite());
}
