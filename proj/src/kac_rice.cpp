#include "gfcrit/kac_rice.hpp"

#include <cmath>
#include <numbers>

namespace gfcrit {

ValueHessianSampler::ValueHessianSampler(const SpectralMoments& moments)
    : moments_(moments), offdiagonal_sd_(std::sqrt(moments.b)) {
  const int n = moments.dim;
  const double a2 = moments.a * moments.a;
  Mat cov = Mat::Constant(n, n, moments.b - a2);
  cov.diagonal().setConstant(3.0 * moments.b - a2);
  // Symmetric square root tolerates the semidefinite boundary cases.
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-12 * cov.diagonal().maxCoeff())
    throw std::invalid_argument("sampler: conditional Hessian covariance is indefinite");
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  diagonal_factor_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

void ValueHessianSampler::sample_into(Rng& rng, double& value, double* hessian) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = moments_.dim;
  value = normal(rng);
  double z[3];
  for (int i = 0; i < n; ++i) z[i] = normal(rng);
  for (int i = 0; i < n; ++i) {
    double g = 0.0;
    for (int k = 0; k < n; ++k) g += diagonal_factor_(i, k) * z[k];
    hessian[i * n + i] = moments_.a * value + g;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) hessian[i * n + j] = offdiagonal_sd_ * normal(rng);
}

ValueHessian ValueHessianSampler::sample(Rng& rng) const {
  const int n = moments_.dim;
  double buf[9];
  ValueHessian out;
  sample_into(rng, out.value, buf);
  out.hessian.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out.hessian(i, j) = out.hessian(j, i) = buf[i * n + j];
  return out;
}

ValueHessian sample_value_hessian(const SpectralMoments& moments, Rng& rng) {
  return ValueHessianSampler(moments).sample(rng);
}

namespace {

/// |det H| and index from the eigenvalues, so both come from one decomposition.
template <int N>
void det_and_index(const double* h, double& abs_det, int& index) {
  Eigen::Matrix<double, N, N> m;
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) m(i, j) = m(j, i) = h[i * N + j];
  Eigen::Matrix<double, N, 1> ev;
  if constexpr (N == 1) {
    ev(0) = m(0, 0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> solver;
    solver.computeDirect(m, Eigen::EigenvaluesOnly);
    ev = solver.eigenvalues();
  }
  abs_det = 1.0;
  index = 0;
  for (int i = 0; i < N; ++i) {
    abs_det *= std::abs(ev(i));
    if (ev(i) < 0.0) ++index;
  }
}

void sample_det_index(const ValueHessianSampler& sampler, Rng& rng, double& value, double& abs_det,
                      int& index) {
  double h[9];
  sampler.sample_into(rng, value, h);
  switch (sampler.moments().dim) {
    case 1:
      det_and_index<1>(h, abs_det, index);
      break;
    case 2:
      det_and_index<2>(h, abs_det, index);
      break;
    default:
      det_and_index<3>(h, abs_det, index);
      break;
  }
}

double gradient_density_at_zero(const SpectralMoments& m) {
  return std::pow(2.0 * std::numbers::pi * m.lambda, -0.5 * m.dim);
}

void check_index(const SpectralMoments& m, int index) {
  if (index < 0 || index > m.dim) throw std::invalid_argument("index must lie in 0..N");
}

}  // namespace

HeightDistEstimate estimate_height_dist(const SpectralMoments& moments, int index,
                                        const std::vector<double>& u_grid, long samples, Rng& rng) {
  check_index(moments, index);
  if (samples < 1) throw std::invalid_argument("estimate_height_dist: need at least one sample");
  const ValueHessianSampler sampler(moments);
  const std::size_t m = u_grid.size();
  std::vector<double> sum_wy(m, 0.0), sum_w2y(m, 0.0);
  double sum_w = 0.0, sum_w2 = 0.0;
  for (long s = 0; s < samples; ++s) {
    double x, w;
    int idx;
    sample_det_index(sampler, rng, x, w, idx);
    if (idx != index) continue;
    sum_w += w;
    sum_w2 += w * w;
    for (std::size_t j = 0; j < m; ++j)
      if (x > u_grid[j]) {
        sum_wy[j] += w;
        sum_w2y[j] += w * w;
      }
  }
  HeightDistEstimate out;
  out.index = index;
  out.u_grid = u_grid;
  out.samples = samples;
  out.effective_samples = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
  out.reliable = out.effective_samples >= 10.0;
  out.survival.assign(m, 0.0);
  out.std_error.assign(m, 0.0);
  if (!(sum_w > 0.0)) return out;
  for (std::size_t j = 0; j < m; ++j) {
    const double r = sum_wy[j] / sum_w;
    // sum w^2 (y - r)^2 with y in {0, 1}
    const double spread = sum_w2y[j] * (1.0 - 2.0 * r) + r * r * sum_w2;
    out.survival[j] = r;
    out.std_error[j] = std::sqrt(std::max(spread, 0.0)) / sum_w;
  }
  return out;
}

std::vector<std::vector<DensityEstimate>> count_density_table(const SpectralMoments& moments,
                                                              const std::vector<double>& u_grid,
                                                              long samples, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("count_density_table: need at least two samples");
  const int n = moments.dim;
  const ValueHessianSampler sampler(moments);
  const std::size_t m = u_grid.size();
  std::vector<std::vector<double>> sum(n + 1, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> sum2 = sum;
  for (long s = 0; s < samples; ++s) {
    double x, w;
    int idx;
    sample_det_index(sampler, rng, x, w, idx);
    for (std::size_t j = 0; j < m; ++j)
      if (x >= u_grid[j]) {
        sum[idx][j] += w;
        sum2[idx][j] += w * w;
      }
  }
  const double scale = gradient_density_at_zero(moments);
  const double count = static_cast<double>(samples);
  std::vector<std::vector<DensityEstimate>> out(n + 1, std::vector<DensityEstimate>(m));
  for (int i = 0; i <= n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double mean = sum[i][j] / count;
      const double var = std::max(sum2[i][j] / count - mean * mean, 0.0) * count / (count - 1.0);
      out[i][j] = {scale * mean, scale * std::sqrt(var / count), samples};
    }
  return out;
}

DensityEstimate expected_count_density(const SpectralMoments& moments, double u, int index,
                                       long samples, Rng& rng) {
  check_index(moments, index);
  return count_density_table(moments, {u}, samples, rng)[index][0];
}

DensityEstimate predicted_aniso_count(const SpectralMoments& moments, const Mat& matrix,
                                      const Domain& domain, double u, int index, long samples,
                                      Rng& rng) {
  if (matrix.rows() != moments.dim || matrix.cols() != moments.dim || domain.dim() != moments.dim)
    throw std::invalid_argument("predicted_aniso_count: dimension mismatch");
  const double det = std::abs(matrix.determinant());
  if (!(det > 1e-12)) throw std::invalid_argument("predicted_aniso_count: singular matrix");
  DensityEstimate d = expected_count_density(moments, u, index, samples, rng);
  const double factor = det * domain.interior_volume();
  return {factor * d.estimate, factor * d.std_error, d.samples};
}

}  // namespace gfcrit
