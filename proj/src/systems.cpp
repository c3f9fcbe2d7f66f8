#include "momentctl/systems.hpp"

#include <cmath>

namespace momentctl::systems {

EnsembleSystem bloch_system(const ParamInterval& alpha,
                            const ParamInterval& beta, const Vector& x0,
                            const Vector& xT, const ControlBounds& bounds) {
  EnsembleSystem sys;
  sys.drift = Matrix::Zero(3, 3);
  sys.drift(0, 1) = -1.0;
  sys.drift(1, 0) = 1.0;

  Matrix b1 = Matrix::Zero(3, 3);
  b1(0, 2) = 1.0;
  b1(2, 0) = -1.0;
  Matrix b2 = Matrix::Zero(3, 3);
  b2(1, 2) = -1.0;
  b2(2, 1) = 1.0;
  sys.inputs = {b1, b2};

  sys.alpha_range = alpha;
  sys.beta_range = beta;
  sys.x0 = x0;
  sys.xT = xT;
  sys.bounds = bounds;
  sys.validate();
  return sys;
}

ComplexEmbedding raman_nath_matrices(int N_prime, double omega_r) {
  MOMENTCTL_REQUIRE(N_prime >= 1, "Raman-Nath truncation N' must be >= 1");
  const Index size = N_prime + 1;
  ComplexEmbedding e;
  e.A0 = Matrix::Zero(size, size);
  for (Index j = 0; j < size; ++j) {
    const double order = 2.0 * static_cast<double>(j);
    e.A0(j, j) = omega_r * order * order;
  }
  e.B0 = Matrix::Zero(size, size);
  for (Index j = 0; j + 1 < size; ++j) {
    const double c = (j == 0) ? std::sqrt(2.0) / 2.0 : 0.5;
    e.B0(j, j + 1) = c;
    e.B0(j + 1, j) = c;
  }
  return e;
}

Matrix embed_generator(const Matrix& M) {
  MOMENTCTL_REQUIRE(M.rows() == M.cols(), "embedding requires a square matrix");
  MOMENTCTL_REQUIRE((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0,
                    "embedding requires a symmetric matrix");
  const Index s = M.rows();
  Matrix out = Matrix::Zero(2 * s, 2 * s);
  out.topRightCorner(s, s) = M;
  out.bottomLeftCorner(s, s) = -M;
  return out;
}

std::pair<Matrix, Matrix> embed_complex(const Matrix& A0, const Matrix& B0) {
  MOMENTCTL_REQUIRE(A0.rows() == B0.rows() && A0.cols() == B0.cols(),
                    "A0 and B0 must have equal dimensions");
  return {embed_generator(A0), embed_generator(B0)};
}

ControlBounds raman_nath_default_bounds(int n_prime) {
  ControlBounds b;
  b.u_min = 0.0;
  b.u_max = 10.0 * n_prime;
  return b;
}

EnsembleSystem raman_nath_system(int N_prime, int n_prime,
                                 const ParamInterval& alpha,
                                 const ParamInterval& beta, double omega_r) {
  return raman_nath_system(N_prime, n_prime, alpha, beta, omega_r,
                           raman_nath_default_bounds(n_prime));
}

EnsembleSystem raman_nath_system(int N_prime, int n_prime,
                                 const ParamInterval& alpha,
                                 const ParamInterval& beta, double omega_r,
                                 const ControlBounds& bounds) {
  MOMENTCTL_REQUIRE(n_prime >= 1 && n_prime <= N_prime,
                    "invalid momentum index: need 1 <= n' <= N'");
  const ComplexEmbedding e = raman_nath_matrices(N_prime, omega_r);
  auto [drift, input] = embed_complex(e.A0, e.B0);

  EnsembleSystem sys;
  sys.drift = std::move(drift);
  sys.inputs = {std::move(input)};
  sys.alpha_range = alpha;
  sys.beta_range = beta;
  const Index n = e.embedded_dim();
  sys.x0 = Vector::Zero(n);
  sys.x0(0) = 1.0;
  sys.xT = Vector::Zero(n);
  sys.xT(n_prime) = 1.0;
  sys.bounds = bounds;
  sys.validate();
  return sys;
}

EnsembleSystem custom_system(Matrix drift, std::vector<Matrix> inputs,
                             const ParamInterval& alpha,
                             const ParamInterval& beta, Vector x0, Vector xT,
                             const ControlBounds& bounds) {
  EnsembleSystem sys;
  sys.drift = std::move(drift);
  sys.inputs = std::move(inputs);
  sys.alpha_range = alpha;
  sys.beta_range = beta;
  sys.x0 = std::move(x0);
  sys.xT = std::move(xT);
  sys.bounds = bounds;
  sys.validate();
  return sys;
}

}  // namespace momentctl::systems
