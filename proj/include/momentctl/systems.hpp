#pragma once

#include "momentctl/common.hpp"
#include "momentctl/ensemble.hpp"

namespace momentctl::systems {

/// Bloch equations in the rotating frame without relaxation:
///   dX/dt = [[0, -a, b u1], [a, 0, -b u2], [-b u1, b u2, 0]] X.
EnsembleSystem bloch_system(const ParamInterval& alpha,
                            const ParamInterval& beta, const Vector& x0,
                            const Vector& xT, const ControlBounds& bounds = {});

/// Real symmetric pair defining dZ/dt = -i (alpha A0 + u beta B0) Z, and its
/// real-valued embedding of dimension 2 * A0.rows().
struct ComplexEmbedding {
  Matrix A0;
  Matrix B0;

  Index embedded_dim() const { return 2 * A0.rows(); }
};

/// Truncated Raman-Nath ladder with N_prime + 1 momentum orders:
/// A0 = omega_r diag(0, 4, .., (2N')^2), B0 tridiagonal with zero diagonal,
/// (0,1) coupling sqrt(2)/2 and 1/2 elsewhere.
ComplexEmbedding raman_nath_matrices(int N_prime, double omega_r = 1.0);

/// [[0, M], [-M, 0]]; skew-symmetric for symmetric M. Throws Error when M is
/// not symmetric.
Matrix embed_generator(const Matrix& M);

/// Embedded (drift, input) generators of -i (alpha A0 + u beta B0) acting on
/// X = [Re Z', Im Z']'.
std::pair<Matrix, Matrix> embed_complex(const Matrix& A0, const Matrix& B0);

/// Raman-Nath ensemble steering |0> to the momentum order n_prime; the
/// target has its single unit entry at index n_prime (zero based). Default
/// amplitude bounds are [0, 10 n'].
EnsembleSystem raman_nath_system(int N_prime, int n_prime,
                                 const ParamInterval& alpha,
                                 const ParamInterval& beta,
                                 double omega_r = 1.0);
EnsembleSystem raman_nath_system(int N_prime, int n_prime,
                                 const ParamInterval& alpha,
                                 const ParamInterval& beta, double omega_r,
                                 const ControlBounds& bounds);

/// Default Raman-Nath bounds for target order n_prime: U in [0, 10 n'].
ControlBounds raman_nath_default_bounds(int n_prime);

/// Generic ensemble from user matrices.
EnsembleSystem custom_system(Matrix drift, std::vector<Matrix> inputs,
                             const ParamInterval& alpha,
                             const ParamInterval& beta, Vector x0, Vector xT,
                             const ControlBounds& bounds = {});

}  // namespace momentctl::systems
