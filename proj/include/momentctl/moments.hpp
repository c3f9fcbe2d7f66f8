#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "momentctl/common.hpp"
#include "momentctl/ensemble.hpp"

namespace momentctl::moments {

/// Coefficient c_k = (k+1)/sqrt((2k+3)(2k+1)) of the three-term recurrence
/// g L_k(g) = c_{k-1} L_{k-1}(g) + c_k L_{k+1}(g) for orthonormal Legendre
/// polynomials on [-1, 1].
double recurrence_coeff(int k);

/// Orthonormal Legendre polynomial L_k(gamma), with L_0 = 1/sqrt(2).
/// Throws Error when gamma lies outside [-1, 1] by more than 1e-12.
double legendre_eval(int k, double gamma);

/// L_0(gamma) .. L_max_degree(gamma) in one recurrence sweep.
Vector legendre_values(int max_degree, double gamma);

/// Cached recurrence constants up to a fixed degree.
class LegendreBasis {
 public:
  explicit LegendreBasis(int max_degree);

  int max_degree() const { return max_degree_; }
  /// c_k for k = 0 .. max_degree - 1 (the couplings used by a degree
  /// max_degree truncation).
  const std::vector<double>& coefficients() const { return coeffs_; }
  Vector values(double gamma) const;

 private:
  int max_degree_;
  std::vector<double> coeffs_;
};

/// Affine map a -> half_width * a + center taking [-1, 1] onto an interval.
struct DomainTransform {
  double center;
  double half_width;

  double to_param(double a) const;
  double to_unit(double param) const;
};

DomainTransform domain_transform(const ParamInterval& iv);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  Vector nodes;
  Vector weights;
  Index size() const { return nodes.size(); }
};

/// npts-point rule, exact for polynomials of degree 2*npts - 1.
GaussRule gauss_legendre(int npts);

/// Symmetric tridiagonal (N+1)x(N+1) matrix with diagonal `center` and
/// off-diagonals c_k * half_width: multiplication by the parameter in the
/// truncated Legendre basis.
Matrix parameter_matrix(int max_degree, const DomainTransform& t);

/// One diagonal block of the lifted generators in the modal basis.
struct GeneratorBlock {
  Index offset = 0;
  Matrix drift;
  std::vector<Matrix> inputs;

  Index size() const { return drift.rows(); }
};

/// Finite-dimensional bilinear system dx/dt = A x + sum_i u_i B_i x over
/// stacked Legendre coefficients x = [x_00', .., x_0Nb', .., x_NaNb']'.
///
/// Besides the dense generators the system carries an orthogonal basis W
/// and a list of diagonal blocks such that W' (A + sum u_i B_i) W is block
/// diagonal for every u. Systems produced by lift() have one n x n block per
/// pair of eigenvalues of (C_alpha, C_beta); systems assembled from raw
/// matrices have a single dense block and W = I.
struct MomentSystem {
  Index n = 0;
  Index m = 0;
  int N_alpha = 0;
  int N_beta = 0;
  Matrix A;
  std::vector<Matrix> B;
  Vector x0;
  Vector xT;
  Matrix P;
  ControlBounds bounds;

  Matrix C_alpha;  // empty when not lifted
  Matrix C_beta;

  std::shared_ptr<const Matrix> modal_basis;  // null means identity
  std::vector<GeneratorBlock> blocks;

  Index dim() const { return A.rows(); }
  Index input_count() const { return m; }
  Index output_dim() const { return P.rows(); }

  /// Dense generator A + sum_i u_i B_i.
  Matrix generator(const Eigen::Ref<const Vector>& u) const;

  /// x in moment coordinates -> modal coordinates, and back.
  Vector to_modal(const Eigen::Ref<const Vector>& x) const;
  Vector from_modal(const Eigen::Ref<const Vector>& y) const;
};

/// Lift an ensemble to Legendre moment coordinates truncated at degrees
/// (N_alpha, N_beta). P defaults to the D x D identity.
MomentSystem lift(const EnsembleSystem& system, int N_alpha, int N_beta,
                  const std::optional<Matrix>& P = std::nullopt);

/// Wrap explicit generators as a moment system with a single dense block.
MomentSystem make_moment_system(Matrix A, std::vector<Matrix> B, Vector x0,
                                Vector xT,
                                const std::optional<Matrix>& P = std::nullopt,
                                ControlBounds bounds = {});

/// Truncated expansion sum_{p,q} x_pq L_p(a) L_q(b) at (a, b) in [-1,1]^2.
Vector reconstruct(const Eigen::Ref<const Vector>& x, double a, double b,
                   const MomentSystem& ms);
Vector reconstruct(const Eigen::Ref<const Vector>& x, double a, double b,
                   Index n, int N_alpha, int N_beta);

/// Tensor quadrature approximation of the coefficient integrals
/// x_pq = int int X(a,b) L_p(a) L_q(b) da db.
///
/// samples[i * rule_b.size() + j] holds X at (rule_a.nodes(i),
/// rule_b.nodes(j)). Each rule needs at least max(N_alpha, N_beta) + 1
/// points.
Vector project_moments(const std::vector<Vector>& samples,
                       const GaussRule& rule_a, const GaussRule& rule_b,
                       int N_alpha, int N_beta);

/// Default oracle rule size 2*max(N_alpha, N_beta) + 8.
int default_quadrature_points(int N_alpha, int N_beta);

}  // namespace momentctl::moments
