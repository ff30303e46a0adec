#include "gfcrit/covariance.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace gfcrit {

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string_view to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::squared_exponential:
      return "squared-exponential";
    case CovarianceKind::band_limited:
      return "band-limited";
  }
  return "unknown";
}

CovarianceKind parse_covariance_kind(std::string_view name) {
  if (name == "squared-exponential") return CovarianceKind::squared_exponential;
  if (name == "band-limited") return CovarianceKind::band_limited;
  throw std::invalid_argument("unknown covariance kind: " + std::string(name));
}

CovarianceModel::CovarianceModel(CovarianceKind kind, double length_scale, int dim)
    : kind_(kind), length_scale_(length_scale), dim_(dim) {
  if (!(length_scale > 0.0) || !std::isfinite(length_scale))
    throw std::invalid_argument("covariance length scale must be positive");
  if (dim < 1 || dim > 3) throw std::invalid_argument("covariance dimension must be 1, 2 or 3");
}

double CovarianceModel::spectral_second_moment() const {
  const double l2 = length_scale_ * length_scale_;
  if (kind_ == CovarianceKind::squared_exponential) return 1.0 / l2;
  return 1.0 / (l2 * (dim_ + 2));
}

double CovarianceModel::spectral_fourth_moment() const {
  const double l4 = std::pow(length_scale_, 4);
  if (kind_ == CovarianceKind::squared_exponential) return 3.0 / l4;
  return 3.0 / (l4 * (dim_ + 2) * (dim_ + 4));
}

// rho(s) = E cos(w_1 sqrt(s)) = 1 - m2 s / 2 + m4 s^2 / 24 - ...
double CovarianceModel::rho_prime0() const { return -0.5 * spectral_second_moment(); }
double CovarianceModel::rho_second0() const { return spectral_fourth_moment() / 12.0; }

double CovarianceModel::rho(double s) const {
  if (s < 0.0) throw std::invalid_argument("rho: squared distance must be nonnegative");
  if (kind_ == CovarianceKind::squared_exponential)
    return std::exp(-s / (2.0 * length_scale_ * length_scale_));

  const double x = std::sqrt(s) / length_scale_;
  if (x < 1e-3) return 1.0 + rho_prime0() * s + 0.5 * rho_second0() * s * s;
  switch (dim_) {
    case 1:
      return std::sin(x) / x;
    case 2:
      return 2.0 * std::cyl_bessel_j(1.0, x) / x;
    default:
      return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
  }
}

double CovarianceModel::max_frequency() const {
  return kind_ == CovarianceKind::squared_exponential ? 3.0 / length_scale_ : 1.0 / length_scale_;
}

Vec CovarianceModel::sample_frequency(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec w(dim_);
  for (int d = 0; d < dim_; ++d) w[d] = normal(rng);
  if (kind_ == CovarianceKind::squared_exponential) return w / length_scale_;

  // uniform in the ball: isotropic direction, radius R * U^(1/N)
  double norm = w.norm();
  while (norm == 0.0) {
    for (int d = 0; d < dim_; ++d) w[d] = normal(rng);
    norm = w.norm();
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double radius = std::pow(unif(rng), 1.0 / dim_) / length_scale_;
  return w * (radius / norm);
}

CovarianceModel make_covariance(CovarianceKind kind, double length_scale, int dim) {
  return CovarianceModel(kind, length_scale, dim);
}

}  // namespace gfcrit
