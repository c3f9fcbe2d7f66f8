#include "momentctl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "momentctl/expm.hpp"

namespace momentctl::verify {

void GridSpec::validate() const {
  MOMENTCTL_REQUIRE(n_alpha >= 2 && n_beta >= 2,
                    "verification grid needs at least 2 points per axis");
}

std::vector<double> GridSpec::points(const ParamInterval& iv, int n) const {
  MOMENTCTL_REQUIRE(n >= 2, "verification grid needs at least 2 points per axis");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double s;  // in [-1, 1]
    if (spacing == Spacing::kUniform) {
      s = -1.0 + 2.0 * i / (n - 1);
    } else {
      // Chebyshev-Lobatto points, ascending.
      s = -std::cos(std::numbers::pi * i / (n - 1));
    }
    out[i] = 0.5 * (iv.lo() + iv.hi()) + 0.5 * (iv.hi() - iv.lo()) * s;
  }
  out.front() = iv.lo();
  out.back() = iv.hi();
  return out;
}

Matrix simulate_member(const EnsembleSystem& sys, double alpha, double beta,
                       const dynamics::ControlTrajectory& ctrl) {
  ctrl.validate(sys.input_count());
  const Index K = ctrl.steps();
  Matrix X(K + 1, sys.state_dim());
  X.row(0) = sys.x0.transpose();
  Vector x = sys.x0;
  for (Index k = 0; k < K; ++k) {
    const Matrix gen = sys.member_generator(alpha, beta, ctrl.U.row(k).transpose());
    x = expm(ctrl.grid.dt(k) * gen) * x;
    X.row(k + 1) = x.transpose();
  }
  return X;
}

VerificationResult grid_verify(const EnsembleSystem& sys,
                               const dynamics::ControlTrajectory& ctrl,
                               const GridSpec& grid, int threads,
                               bool keep_trajectories) {
  grid.validate();
  sys.validate();
  ctrl.validate(sys.input_count());
  const auto as = grid.points(sys.alpha_range, grid.n_alpha);
  const auto bs = grid.points(sys.beta_range, grid.n_beta);
  const std::size_t total = as.size() * bs.size();

  VerificationResult res;
  res.alpha.resize(total);
  res.beta.resize(total);
  res.terminal_error.resize(total);
  if (keep_trajectories) res.trajectories.resize(total);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t idx = begin; idx < total; idx += stride) {
      const double a = as[idx / bs.size()];
      const double b = bs[idx % bs.size()];
      Matrix X = simulate_member(sys, a, b, ctrl);
      res.alpha[idx] = a;
      res.beta[idx] = b;
      res.terminal_error[idx] =
          (X.row(X.rows() - 1).transpose() - sys.xT).norm();
      if (keep_trajectories) res.trajectories[idx] = std::move(X);
    }
  };

  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back(work, static_cast<std::size_t>(t),
                        static_cast<std::size_t>(nthreads));
    }
    for (auto& th : pool) th.join();
  }

  double sum = 0.0;
  for (double e : res.terminal_error) {
    res.max_error = std::max(res.max_error, e);
    sum += e;
  }
  res.mean_error = sum / static_cast<double>(total);
  return res;
}

MomentDiscrepancy cross_validate_moments(const EnsembleSystem& sys,
                                         const moments::MomentSystem& ms,
                                         const dynamics::ControlTrajectory& ctrl,
                                         int quad_points) {
  const int npts = quad_points > 0
                       ? quad_points
                       : moments::default_quadrature_points(ms.N_alpha, ms.N_beta);
  MOMENTCTL_REQUIRE(npts >= std::max(ms.N_alpha, ms.N_beta) + 2,
                    "quadrature order must exceed truncation degree by 2");

  const auto rule = moments::gauss_legendre(npts);
  const auto ta = moments::domain_transform(sys.alpha_range);
  const auto tb = moments::domain_transform(sys.beta_range);

  std::vector<Vector> samples;
  samples.reserve(static_cast<std::size_t>(npts) * npts);
  for (Index i = 0; i < rule.size(); ++i) {
    for (Index j = 0; j < rule.size(); ++j) {
      const Matrix X = simulate_member(sys, ta.to_param(rule.nodes(i)),
                                       tb.to_param(rule.nodes(j)), ctrl);
      samples.push_back(X.row(X.rows() - 1).transpose());
    }
  }

  const Vector terminal = dynamics::simulate(ms, ctrl).terminal();
  const Vector projected =
      moments::project_moments(samples, rule, rule, ms.N_alpha, ms.N_beta);

  MomentDiscrepancy out;
  out.quadrature_points = npts;
  out.max_coefficient = (terminal - projected).cwiseAbs().maxCoeff();
  for (Index i = 0; i < rule.size(); ++i) {
    for (Index j = 0; j < rule.size(); ++j) {
      const Vector rec =
          moments::reconstruct(terminal, rule.nodes(i), rule.nodes(j), ms);
      const double d = (rec - samples[i * rule.size() + j]).norm();
      out.max_reconstruction = std::max(out.max_reconstruction, d);
    }
  }
  return out;
}

}  // namespace momentctl::verify
