#pragma once

#include <memory>

#include "gfcrit/diffeomorphism.hpp"
#include "gfcrit/spectral_field.hpp"

namespace gfcrit {

/// X(t) = Z(f(t)) with jets from the exact chain rule:
///
///   grad X = B^T grad Z(f(t))
///   Hess X = B^T Hess Z(f(t)) B + sum_k dZ/dx'_k (f(t)) Hess f_k(t)
///
/// The curvature sum vanishes for linear f and at critical points.
class TransformedField final : public ScalarField {
 public:
  TransformedField(std::shared_ptr<const SpectralField> base, Diffeomorphism map);

  int dim() const override { return base_->dim(); }
  const SpectralField& base() const { return *base_; }
  const Diffeomorphism& map() const { return map_; }

  FieldJet jet(const Vec& t) const override;
  ValueGradient value_gradient(const Vec& t) const override;

  /// B^T Hess Z(f(t)) B alone, the reduced relation valid at critical points.
  Mat congruence_hessian(const Vec& t) const;
  /// sum_k dZ/dx'_k (f(t)) Hess f_k(t).
  Mat curvature_term(const Vec& t) const;

  double axis_frequency(int axis) const override;
  double gradient_scale() const override;
  double hessian_scale() const override;

 private:
  std::shared_ptr<const SpectralField> base_;
  Diffeomorphism map_;
};

TransformedField transform_field(std::shared_ptr<const SpectralField> base, const Diffeomorphism& map);

}  // namespace gfcrit
