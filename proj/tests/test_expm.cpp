#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "momentctl/expm.hpp"

using namespace momentctl;

namespace {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Taylor series to 60 terms in extended precision after scaling the 1-norm
// below 1/2, then repeated squaring.
Matrix taylor_oracle(const Matrix& M) {
  MatrixL A = M.cast<long double>();
  int s = 0;
  long double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  while (norm > 0.5L) {
    norm /= 2;
    ++s;
  }
  A /= std::pow(2.0L, s);
  MatrixL term = MatrixL::Identity(A.rows(), A.cols());
  MatrixL sum = term;
  for (int k = 1; k <= 60; ++k) {
    term = term * A / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum.cast<double>();
}

double rel_err(const Matrix& X, const Matrix& Y) {
  return (X - Y).norm() / std::max(1.0, Y.norm());
}

}  // namespace

TEST(Expm, MatchesTaylorOracleAcrossNorms) {
  std::mt19937 gen(11);
  std::normal_distribution<double> nd;
  for (int n : {1, 2, 4, 7, 12}) {
    for (double scale : {1e-3, 0.1, 0.9, 2.5, 6.0, 20.0}) {
      Matrix M = Matrix::NullaryExpr(n, n, [&] { return nd(gen); });
      M *= scale / M.cwiseAbs().colwise().sum().maxCoeff();
      EXPECT_LT(rel_err(expm(M), taylor_oracle(M)), 1e-12)
          << "n=" << n << " norm=" << scale;
    }
  }
}

TEST(Expm, PlaneRotationClosedForm) {
  for (double th : {0.0, 1e-8, 0.3, 2.0, 17.5, 100.0}) {
    Matrix M(2, 2);
    M << 0, -th, th, 0;
    Matrix R(2, 2);
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    EXPECT_LT((expm(M) - R).cwiseAbs().maxCoeff(), 1e-13 * std::max(1.0, th)) << th;
  }
}

TEST(Expm, SymmetricEigenOracle) {
  std::mt19937 gen(5);
  std::normal_distribution<double> nd;
  Matrix S = Matrix::NullaryExpr(6, 6, [&] { return nd(gen); });
  S = (0.5 * (S + S.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Matrix expect = es.eigenvectors() *
                        es.eigenvalues().array().exp().matrix().asDiagonal() *
                        es.eigenvectors().transpose();
  EXPECT_LT(rel_err(expm(S), expect), 1e-13);
}

TEST(Expm, NilpotentIsFiniteSeries) {
  Matrix N = Matrix::Zero(3, 3);
  N(0, 1) = 2.0;
  N(1, 2) = 3.0;
  Matrix expect = Matrix::Identity(3, 3) + N + 0.5 * N * N;
  EXPECT_LT((expm(N) - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Expm, ScalingAndSquaringLargeNorm) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 30.0;
  D(1, 1) = -30.0;
  const Matrix E = expm(D);
  EXPECT_NEAR(E(0, 0) / std::exp(30.0), 1.0, 1e-13);
  EXPECT_NEAR(E(1, 1) / std::exp(-30.0), 1.0, 1e-12);
  EXPECT_EQ(E(0, 1), 0.0);
}

TEST(Expm, InverseAndSkewOrthogonality) {
  std::mt19937 gen(3);
  std::normal_distribution<double> nd;
  Matrix M = Matrix::NullaryExpr(8, 8, [&] { return nd(gen); });
  const Matrix I = Matrix::Identity(8, 8);
  EXPECT_LT((expm(M) * expm(-M) - I).norm(), 1e-10);
  const Matrix K = (M - M.transpose()).eval();
  const Matrix Q = expm(K);
  EXPECT_LT((Q.transpose() * Q - I).norm(), 1e-13);
}

TEST(Expm, ZeroAndEmpty) {
  EXPECT_TRUE(expm(Matrix::Zero(4, 4)).isIdentity(0.0));
  EXPECT_EQ(expm(Matrix(0, 0)).size(), 0);
}

TEST(Expm, RejectsBadInput) {
  EXPECT_THROW(expm(Matrix::Zero(2, 3)), Error);
  Matrix M = Matrix::Zero(2, 2);
  M(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(expm(M), Error);
  M(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(expm(M), Error);
}
