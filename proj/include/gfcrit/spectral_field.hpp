#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gfcrit/covariance.hpp"
#include "gfcrit/field.hpp"

namespace gfcrit {

/// Random-wave field Z(t) = sqrt(2/K) sum_k cos(<w_k, t> + phi_k).
///
/// Jets are exact. In torus mode every w_k lies on (2 pi / L) Z^N and the
/// field is L-periodic along each axis.
class SpectralField final : public ScalarField {
 public:
  SpectralField(CovarianceModel model, Mat frequencies, Vec phases,
                std::optional<double> period = std::nullopt, std::uint64_t seed = 0);

  int dim() const override { return static_cast<int>(frequencies_.rows()); }
  int waves() const { return static_cast<int>(frequencies_.cols()); }
  const Mat& frequencies() const { return frequencies_; }
  const Vec& phases() const { return phases_; }
  double amplitude() const { return amplitude_; }
  bool periodic() const { return period_.has_value(); }
  std::optional<double> period() const { return period_; }
  const CovarianceModel& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }

  double value(const Vec& t) const;
  FieldJet jet(const Vec& t) const override;
  ValueGradient value_gradient(const Vec& t) const override;

  double axis_frequency(int axis) const override;
  double gradient_scale() const override;
  double hessian_scale() const override;

  /// Text format:
  ///   gfcrit-spectral-field 1
  ///   kind <covariance kind>
  ///   length_scale <l>
  ///   dim <N>
  ///   waves <K>
  ///   seed <u64>
  ///   period <L | none>
  ///   then K rows "w_1 ... w_N phi", all numbers with 17 significant digits.
  void write(std::ostream& out) const;
  static SpectralField read(std::istream& in);

 private:
  CovarianceModel model_;
  Mat frequencies_;  // N x K
  std::vector<double> packed_;  // dimension-major copy of frequencies_
  Vec phases_;
  double amplitude_;
  std::optional<double> period_;
  std::uint64_t seed_;
};

/// Draws K waves from the model's spectral law; with a torus period the
/// frequencies are rounded to the lattice (2 pi / L) Z^N.
SpectralField sample_field(const CovarianceModel& model, int waves, Rng& rng,
                           std::optional<double> torus_period = std::nullopt,
                           std::uint64_t seed_tag = 0);
SpectralField sample_field(const CovarianceModel& model, int waves, std::uint64_t seed,
                           std::optional<double> torus_period = std::nullopt);

}  // namespace gfcrit
