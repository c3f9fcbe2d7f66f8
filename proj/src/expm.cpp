#include "momentctl/expm.hpp"

#include <array>
#include <cmath>

namespace momentctl {

namespace {

// Largest 1-norm for which the degree-m approximant meets unit roundoff
// (Higham 2005, double precision).
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2,
                                          2.539398330063230e-1,
                                          9.504178996162932e-1,
                                          2.097847961257068e0,
                                          5.371920351148152e0};

constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0,
                                          420.0,   30.0,    1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0,
                                          277200.0,   25200.0,   1512.0,
                                          56.0,       1.0};
constexpr std::array<double, 10> kPade9 = {
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
    2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

// Low-degree approximants: U = A * sum_odd, V = sum_even over powers of A^2.
template <std::size_t N>
void pade_low(const Matrix& A, const std::array<double, N>& b, Matrix& U,
              Matrix& V) {
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  Matrix odd = b[1] * I;
  Matrix even = b[0] * I;
  Matrix pow = I;
  for (std::size_t k = 2; k < N; k += 2) {
    pow = pow * A2;
    even += b[k] * pow;
    if (k + 1 < N) odd += b[k + 1] * pow;
  }
  U.noalias() = A * odd;
  V = even;
}

void pade13(const Matrix& A, Matrix& U, Matrix& V) {
  const auto& b = kPade13;
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  Matrix tmp = b[13] * A6 + b[11] * A4 + b[9] * A2;
  Matrix inner = A6 * tmp;
  inner += b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
  U.noalias() = A * inner;
  tmp = b[12] * A6 + b[10] * A4 + b[8] * A2;
  V = A6 * tmp;
  V += b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

}  // namespace

Matrix expm(const Eigen::Ref<const Matrix>& M) {
  MOMENTCTL_REQUIRE(M.rows() == M.cols(), "expm requires a square matrix");
  MOMENTCTL_REQUIRE(M.allFinite(), "expm requires finite entries");
  const Index n = M.rows();
  if (n == 0) return Matrix(0, 0);

  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  Matrix U(n, n);
  Matrix V(n, n);
  int squarings = 0;
  Matrix A = M;

  if (norm1 <= kTheta[0]) {
    pade_low(A, kPade3, U, V);
  } else if (norm1 <= kTheta[1]) {
    pade_low(A, kPade5, U, V);
  } else if (norm1 <= kTheta[2]) {
    pade_low(A, kPade7, U, V);
  } else if (norm1 <= kTheta[3]) {
    pade_low(A, kPade9, U, V);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta[4]))));
    A /= std::ldexp(1.0, squarings);
    pade13(A, U, V);
  }

  Matrix result = (V - U).partialPivLu().solve(V + U);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace momentctl
