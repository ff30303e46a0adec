#include "gfcrit/transformed_field.hpp"

namespace gfcrit {

TransformedField::TransformedField(std::shared_ptr<const SpectralField> base, Diffeomorphism map)
    : base_(std::move(base)), map_(std::move(map)) {
  if (!base_) throw std::invalid_argument("transformed field needs a base realization");
  if (base_->dim() != map_.dim())
    throw std::invalid_argument("diffeomorphism dimension does not match the field");
}

FieldJet TransformedField::jet(const Vec& t) const {
  const MapJet f = map_.jet(t);
  const FieldJet z = base_->jet(f.value);
  FieldJet out;
  out.value = z.value;
  out.gradient = f.jacobian.transpose() * z.gradient;
  out.hessian = f.jacobian.transpose() * z.hessian * f.jacobian;
  if (!map_.is_linear())
    for (int k = 0; k < dim(); ++k) out.hessian += z.gradient[k] * f.hessians[k];
  out.symmetrize();
  return out;
}

ValueGradient TransformedField::value_gradient(const Vec& t) const {
  const Vec image = map_.forward(t);
  ValueGradient z = base_->value_gradient(image);
  return {z.value, map_.jacobian(t).transpose() * z.gradient};
}

Mat TransformedField::congruence_hessian(const Vec& t) const {
  const MapJet f = map_.jet(t);
  const FieldJet z = base_->jet(f.value);
  return f.jacobian.transpose() * z.hessian * f.jacobian;
}

Mat TransformedField::curvature_term(const Vec& t) const {
  const MapJet f = map_.jet(t);
  const ValueGradient z = base_->value_gradient(f.value);
  Mat out = Mat::Zero(dim(), dim());
  for (int k = 0; k < dim(); ++k) out += z.gradient[k] * f.hessians[k];
  return out;
}

double TransformedField::axis_frequency(int axis) const {
  return base_->axis_frequency(axis) * map_.column_norm_bound(axis);
}

double TransformedField::gradient_scale() const {
  return base_->gradient_scale() * map_.operator_norm_bound();
}

double TransformedField::hessian_scale() const {
  const double norm = map_.operator_norm_bound();
  return base_->hessian_scale() * norm * norm;
}

TransformedField transform_field(std::shared_ptr<const SpectralField> base, const Diffeomorphism& map) {
  return TransformedField(std::move(base), map);
}

}  // namespace gfcrit
