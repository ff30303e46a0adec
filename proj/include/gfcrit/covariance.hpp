#pragma once

#include <string_view>

#include "gfcrit/types.hpp"

namespace gfcrit {

enum class CovarianceKind { squared_exponential, band_limited };

std::string_view to_string(CovarianceKind kind);
CovarianceKind parse_covariance_kind(std::string_view name);

/// Isotropic unit-variance covariance E[Z(t)Z(s)] = rho(|t-s|^2).
///
/// squared-exponential: rho(s) = exp(-s / (2 l^2)), spectral law N(0, I / l^2).
/// band-limited: spectral density uniform on the ball of radius 1 / l.
class CovarianceModel {
 public:
  CovarianceModel(CovarianceKind kind, double length_scale, int dim);

  CovarianceKind kind() const { return kind_; }
  double length_scale() const { return length_scale_; }
  int dim() const { return dim_; }

  /// rho as a function of squared distance.
  double rho(double s) const;
  double rho_prime0() const;
  double rho_second0() const;

  /// E[w_1^2] and E[w_1^4] under the spectral law.
  double spectral_second_moment() const;
  double spectral_fourth_moment() const;

  /// Frequency bound used to size search grids: 3 sigma for the Gaussian
  /// spectrum, the cutoff radius for the band-limited one.
  double max_frequency() const;

  Vec sample_frequency(Rng& rng) const;

 private:
  CovarianceKind kind_;
  double length_scale_;
  int dim_;
};

CovarianceModel make_covariance(CovarianceKind kind, double length_scale, int dim);

}  // namespace gfcrit
