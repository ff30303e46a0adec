#include "gfcrit/moments.hpp"

#include <cmath>
#include <string>

namespace gfcrit {

SpectralMoments::SpectralMoments(int dim_, double lambda_, double a_, double b_)
    : dim(dim_), lambda(lambda_), a(a_), b(b_) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("moments: dimension must be 1, 2 or 3");
  if (!(lambda > 0.0)) throw std::invalid_argument("moments: gradient variance must be positive");
  if (!(b > 0.0)) throw std::invalid_argument("moments: Hessian variance parameter must be positive");
  const Mat cov = joint_covariance();
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(cov).eigenvalues().minCoeff();
  if (min_eig < -1e-12 * cov.diagonal().maxCoeff())
    throw std::invalid_argument("moments: joint covariance of (X, H) is indefinite (min eigenvalue " +
                                std::to_string(min_eig) + ")");
}

double SpectralMoments::cov_hessian(int i, int j, int k, int l) const {
  const auto delta = [](int p, int q) { return p == q ? 1.0 : 0.0; };
  return b * (delta(i, j) * delta(k, l) + delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k));
}

std::pair<int, int> upper_index(int dim, int position) {
  for (int i = 0; i < dim; ++i) {
    const int row = dim - i;
    if (position < row) return {i, i + position};
    position -= row;
  }
  throw std::out_of_range("upper_index");
}

Mat SpectralMoments::joint_covariance() const {
  const int m = hessian_entries();
  Mat cov = Mat::Zero(m + 1, m + 1);
  cov(0, 0) = sigma2;
  for (int p = 0; p < m; ++p) {
    const auto [i, j] = upper_index(dim, p);
    cov(0, p + 1) = cov(p + 1, 0) = cov_value_hessian(i, j);
    for (int q = 0; q < m; ++q) {
      const auto [k, l] = upper_index(dim, q);
      cov(p + 1, q + 1) = cov_hessian(i, j, k, l);
    }
  }
  return cov;
}

double SpectralMoments::hessian_scale() const { return std::sqrt(3.0 * b); }

SpectralMoments spectral_moments(const CovarianceModel& model) {
  const double r1 = model.rho_prime0();
  const double r2 = model.rho_second0();
  return SpectralMoments(model.dim(), -2.0 * r1, 2.0 * r1, 4.0 * r2);
}

}  // namespace gfcrit
