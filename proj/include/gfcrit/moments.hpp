#pragma once

#include "gfcrit/covariance.hpp"

namespace gfcrit {

/// Second-order law of (X, grad X, Hess X) at a point of a stationary
/// isotropic unit-variance field.
///
///   Var(dX/dt_i)          = lambda            (gradient covariance lambda * I)
///   Cov(X, H_ii)          = a
///   Var(H_ii)             = 3b
///   Cov(H_ii, H_jj), i!=j = b
///   Var(H_ij), i<j        = b
///
/// with lambda = -2 rho'(0), a = 2 rho'(0), b = 4 rho''(0). The gradient is
/// uncorrelated with (X, H) because odd derivatives of the covariance vanish
/// at zero lag.
struct SpectralMoments {
  int dim = 1;
  double sigma2 = 1.0;
  double lambda = 1.0;
  double a = -1.0;
  double b = 1.0;

  /// Validates positivity and positive semidefiniteness of the joint
  /// covariance of (X, upper triangle of H).
  SpectralMoments(int dim, double lambda, double a, double b);

  double cov_value_hessian(int i, int j) const { return i == j ? a : 0.0; }
  double cov_hessian(int i, int j, int k, int l) const;

  /// Number of upper-triangle Hessian entries, N(N+1)/2.
  int hessian_entries() const { return dim * (dim + 1) / 2; }
  /// Covariance of (X, H_11, H_12, ..., H_1N, H_22, ..., H_NN).
  Mat joint_covariance() const;
  /// Scale of Hessian entries, sqrt(3b) = sqrt(12 rho''(0)).
  double hessian_scale() const;
};

SpectralMoments spectral_moments(const CovarianceModel& model);

/// Upper-triangle enumeration used by joint_covariance: position -> (i, j).
std::pair<int, int> upper_index(int dim, int position);

}  // namespace gfcrit
