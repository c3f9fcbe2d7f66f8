#include "momentctl/moments.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

namespace momentctl::moments {

namespace {

constexpr double kDomainTol = 1e-12;

Matrix identity(Index k) { return Matrix::Identity(k, k); }

}  // namespace

double recurrence_coeff(int k) {
  MOMENTCTL_REQUIRE(k >= 0, "recurrence coefficient index must be >= 0");
  const double kk = k;
  return (kk + 1.0) / std::sqrt((2.0 * kk + 3.0) * (2.0 * kk + 1.0));
}

Vector legendre_values(int max_degree, double gamma) {
  MOMENTCTL_REQUIRE(max_degree >= 0, "Legendre degree must be >= 0");
  MOMENTCTL_REQUIRE(std::isfinite(gamma) && std::abs(gamma) <= 1.0 + kDomainTol,
                    "Legendre argument outside [-1, 1]");
  Vector v(max_degree + 1);
  v(0) = 1.0 / std::sqrt(2.0);
  if (max_degree == 0) return v;
  v(1) = std::sqrt(1.5) * gamma;
  // L_{k+1} = (g L_k - c_{k-1} L_{k-1}) / c_k
  for (int k = 1; k < max_degree; ++k) {
    v(k + 1) = (gamma * v(k) - recurrence_coeff(k - 1) * v(k - 1)) /
               recurrence_coeff(k);
  }
  return v;
}

double legendre_eval(int k, double gamma) {
  return legendre_values(k, gamma)(k);
}

LegendreBasis::LegendreBasis(int max_degree) : max_degree_(max_degree) {
  MOMENTCTL_REQUIRE(max_degree >= 0, "Legendre degree must be >= 0");
  coeffs_.reserve(max_degree);
  for (int k = 0; k < max_degree; ++k) coeffs_.push_back(recurrence_coeff(k));
}

Vector LegendreBasis::values(double gamma) const {
  return legendre_values(max_degree_, gamma);
}

double DomainTransform::to_param(double a) const {
  return half_width * a + center;
}

double DomainTransform::to_unit(double param) const {
  return (param - center) / half_width;
}

DomainTransform domain_transform(const ParamInterval& iv) {
  // Exact at a = +-1 up to one rounding of each sum.
  return DomainTransform{0.5 * (iv.hi() + iv.lo()), 0.5 * (iv.hi() - iv.lo())};
}

GaussRule gauss_legendre(int npts) {
  MOMENTCTL_REQUIRE(npts >= 1, "Gauss-Legendre rule needs at least one point");
  // Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix.
  Matrix J = parameter_matrix(npts - 1, DomainTransform{0.0, 1.0});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
  GaussRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = 2.0 * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

Matrix parameter_matrix(int max_degree, const DomainTransform& t) {
  MOMENTCTL_REQUIRE(max_degree >= 0, "truncation degree must be >= 0");
  const Index size = max_degree + 1;
  Matrix C = Matrix::Zero(size, size);
  for (Index k = 0; k < size; ++k) C(k, k) = t.center;
  for (Index k = 0; k + 1 < size; ++k) {
    const double off = recurrence_coeff(static_cast<int>(k)) * t.half_width;
    C(k, k + 1) = off;
    C(k + 1, k) = off;
  }
  return C;
}

Matrix MomentSystem::generator(const Eigen::Ref<const Vector>& u) const {
  MOMENTCTL_REQUIRE(u.size() == m, "control size mismatch");
  Matrix g = A;
  for (Index i = 0; i < m; ++i) g += u(i) * B[i];
  return g;
}

Vector MomentSystem::to_modal(const Eigen::Ref<const Vector>& x) const {
  if (!modal_basis) return x;
  return modal_basis->transpose() * x;
}

Vector MomentSystem::from_modal(const Eigen::Ref<const Vector>& y) const {
  if (!modal_basis) return y;
  return *modal_basis * y;
}

MomentSystem lift(const EnsembleSystem& system, int N_alpha, int N_beta,
                  const std::optional<Matrix>& P) {
  MOMENTCTL_REQUIRE(N_alpha >= 0 && N_beta >= 0,
                    "truncation degrees must be >= 0");
  system.validate();

  const Index n = system.state_dim();
  const Index m = system.input_count();
  const Index na = N_alpha + 1;
  const Index nb = N_beta + 1;
  const Index D = n * na * nb;

  MomentSystem ms;
  ms.n = n;
  ms.m = m;
  ms.N_alpha = N_alpha;
  ms.N_beta = N_beta;
  ms.bounds = system.bounds;
  ms.C_alpha = parameter_matrix(N_alpha, domain_transform(system.alpha_range));
  ms.C_beta = parameter_matrix(N_beta, domain_transform(system.beta_range));

  ms.A = Eigen::kroneckerProduct(
      ms.C_alpha, Eigen::kroneckerProduct(identity(nb), system.drift).eval());
  ms.B.reserve(m);
  for (const auto& Bi : system.inputs) {
    ms.B.push_back(Eigen::kroneckerProduct(
        identity(na), Eigen::kroneckerProduct(ms.C_beta, Bi).eval()));
  }

  ms.x0 = Vector::Zero(D);
  ms.xT = Vector::Zero(D);
  ms.x0.head(n) = 2.0 * system.x0;
  ms.xT.head(n) = 2.0 * system.xT;

  if (P) {
    MOMENTCTL_REQUIRE(P->cols() == D && P->rows() > 0,
                      "projection matrix must have D columns");
    ms.P = *P;
  } else {
    ms.P = identity(D);
  }

  // Diagonalize the parameter matrices: W = V_a (x) V_b (x) I_n turns
  // A into diag(a) (x) I (x) drift and B_i into I (x) diag(b) (x) B_i.
  Eigen::SelfAdjointEigenSolver<Matrix> eig_a(ms.C_alpha);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_b(ms.C_beta);
  ms.modal_basis = std::make_shared<const Matrix>(Eigen::kroneckerProduct(
      eig_a.eigenvectors(),
      Eigen::kroneckerProduct(eig_b.eigenvectors(), identity(n)).eval()));

  ms.blocks.reserve(na * nb);
  for (Index j = 0; j < na; ++j) {
    for (Index l = 0; l < nb; ++l) {
      GeneratorBlock blk;
      blk.offset = (j * nb + l) * n;
      blk.drift = eig_a.eigenvalues()(j) * system.drift;
      for (const auto& Bi : system.inputs)
        blk.inputs.push_back(eig_b.eigenvalues()(l) * Bi);
      ms.blocks.push_back(std::move(blk));
    }
  }
  return ms;
}

MomentSystem make_moment_system(Matrix A, std::vector<Matrix> B, Vector x0,
                                Vector xT, const std::optional<Matrix>& P,
                                ControlBounds bounds) {
  const Index D = A.rows();
  MOMENTCTL_REQUIRE(D > 0 && A.cols() == D, "A must be square and non-empty");
  for (const auto& Bi : B) {
    MOMENTCTL_REQUIRE(Bi.rows() == D && Bi.cols() == D,
                      "input matrix dimension does not match A");
  }
  MOMENTCTL_REQUIRE(x0.size() == D && xT.size() == D,
                    "endpoint dimension does not match A");
  bounds.validate();

  MomentSystem ms;
  ms.n = D;
  ms.m = static_cast<Index>(B.size());
  ms.bounds = bounds;
  ms.P = P ? *P : identity(D);
  MOMENTCTL_REQUIRE(ms.P.cols() == D, "projection matrix must have D columns");

  GeneratorBlock blk;
  blk.offset = 0;
  blk.drift = A;
  blk.inputs = B;
  ms.blocks.push_back(std::move(blk));

  ms.A = std::move(A);
  ms.B = std::move(B);
  ms.x0 = std::move(x0);
  ms.xT = std::move(xT);
  return ms;
}

Vector reconstruct(const Eigen::Ref<const Vector>& x, double a, double b,
                   Index n, int N_alpha, int N_beta) {
  const Index nb = N_beta + 1;
  MOMENTCTL_REQUIRE(x.size() == n * (N_alpha + 1) * nb,
                    "moment vector size mismatch");
  const Vector La = legendre_values(N_alpha, a);
  const Vector Lb = legendre_values(N_beta, b);
  Vector out = Vector::Zero(n);
  for (int p = 0; p <= N_alpha; ++p) {
    for (int q = 0; q <= N_beta; ++q) {
      out += (La(p) * Lb(q)) * x.segment((p * nb + q) * n, n);
    }
  }
  return out;
}

Vector reconstruct(const Eigen::Ref<const Vector>& x, double a, double b,
                   const MomentSystem& ms) {
  return reconstruct(x, a, b, ms.n, ms.N_alpha, ms.N_beta);
}

Vector project_moments(const std::vector<Vector>& samples,
                       const GaussRule& rule_a, const GaussRule& rule_b,
                       int N_alpha, int N_beta) {
  MOMENTCTL_REQUIRE(N_alpha >= 0 && N_beta >= 0,
                    "truncation degrees must be >= 0");
  MOMENTCTL_REQUIRE(rule_a.size() >= N_alpha + 1 && rule_b.size() >= N_beta + 1,
                    "insufficient quadrature order for projection");
  MOMENTCTL_REQUIRE(
      static_cast<Index>(samples.size()) == rule_a.size() * rule_b.size(),
      "sample count does not match quadrature grid");
  MOMENTCTL_REQUIRE(!samples.empty(), "no samples");

  const Index n = samples.front().size();
  const Index nb = N_beta + 1;
  Vector x = Vector::Zero(n * (N_alpha + 1) * nb);
  for (Index i = 0; i < rule_a.size(); ++i) {
    const Vector La = legendre_values(N_alpha, rule_a.nodes(i));
    for (Index j = 0; j < rule_b.size(); ++j) {
      const Vector Lb = legendre_values(N_beta, rule_b.nodes(j));
      const Vector& X = samples[i * rule_b.size() + j];
      MOMENTCTL_REQUIRE(X.size() == n, "sample dimension mismatch");
      const double w = rule_a.weights(i) * rule_b.weights(j);
      for (int p = 0; p <= N_alpha; ++p) {
        for (int q = 0; q <= N_beta; ++q) {
          x.segment((p * nb + q) * n, n) += (w * La(p) * Lb(q)) * X;
        }
      }
    }
  }
  return x;
}

int default_quadrature_points(int N_alpha, int N_beta) {
  return 2 * std::max(N_alpha, N_beta) + 8;
}

}  // namespace momentctl::moments
