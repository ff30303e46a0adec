#pragma once

#include <vector>

#include "gfcrit/critical_points.hpp"
#include "gfcrit/moments.hpp"

namespace gfcrit {

struct ValueHessian {
  double value = 0.0;
  Mat hessian;
};

/// Draws (X, H) at a point from the joint Gaussian law given by the moments:
/// X ~ N(0, 1), H = a X I + G with G independent of X,
///   Var(G_ii) = 3b - a^2, Cov(G_ii, G_jj) = b - a^2, Var(G_ij) = b (i < j).
/// The gradient is independent of (X, H) for stationary fields, so this is
/// also the law conditional on grad X = 0.
class ValueHessianSampler {
 public:
  explicit ValueHessianSampler(const SpectralMoments& moments);

  const SpectralMoments& moments() const { return moments_; }
  ValueHessian sample(Rng& rng) const;
  /// Fills value and the upper triangle of a row-major N x N buffer.
  void sample_into(Rng& rng, double& value, double* hessian) const;

 private:
  SpectralMoments moments_;
  Mat diagonal_factor_;  // L with L L^T = conditional covariance of diag(G)
  double offdiagonal_sd_;
};

ValueHessian sample_value_hessian(const SpectralMoments& moments, Rng& rng);

/// F_i(u) = E[|det H| 1{X > u} 1{index = i}] / E[|det H| 1{index = i}]
/// on a common sample, with delta-method standard errors.
struct HeightDistEstimate {
  int index = 0;
  std::vector<double> u_grid;
  std::vector<double> survival;
  std::vector<double> std_error;
  long samples = 0;
  /// (sum w)^2 / sum w^2 for the weights w = |det H| 1{index = i}.
  double effective_samples = 0.0;
  /// False when fewer than 10 effective samples support the denominator.
  bool reliable = false;
};

HeightDistEstimate estimate_height_dist(const SpectralMoments& moments, int index,
                                        const std::vector<double>& u_grid, long samples, Rng& rng);

struct DensityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

/// Expected number of index-i critical points above u per unit volume:
/// (2 pi lambda)^(-N/2) E[|det H| 1{X >= u, index = i}].
DensityEstimate expected_count_density(const SpectralMoments& moments, double u, int index,
                                       long samples, Rng& rng);

/// Densities for every index and every u from one sample: result[i][j]
/// belongs to index i and threshold u_grid[j].
std::vector<std::vector<DensityEstimate>> count_density_table(const SpectralMoments& moments,
                                                              const std::vector<double>& u_grid,
                                                              long samples, Rng& rng);

/// |det A| * Vol(D) * density, the expected count of index-i critical points
/// above u of X(t) = Z(A t) over D. Vol(D) is the reporting region
/// (the box minus its margin).
DensityEstimate predicted_aniso_count(const SpectralMoments& moments, const Mat& matrix,
                                      const Domain& domain, double u, int index, long samples,
                                      Rng& rng);

}  // namespace gfcrit
