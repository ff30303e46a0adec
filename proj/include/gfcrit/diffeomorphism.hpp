#pragma once

#include <memory>
#include <vector>

#include "gfcrit/types.hpp"

namespace gfcrit {

/// One term of a sine warp: amplitude * sin(<frequency, t> + phase) * direction.
struct SineTerm {
  double amplitude = 0.0;
  Vec frequency;
  double phase = 0.0;
  Vec direction;  // max-norm at most 1
};

/// Forward map, Jacobian and coordinate Hessians at one point.
struct MapJet {
  Vec value;
  Mat jacobian;               // B_ij = d f_i / d t_j
  std::vector<Mat> hessians;  // hessians[k] = Hess f_k
};

/// C-infinity diffeomorphism of R^N: identity, linear t -> A t,
/// sine warp t -> t + sum_m eps_m sin(<w_m, t> + c_m) d_m, or a composition.
///
/// Sine warps require sum_m eps_m |w_m| N < 1, which makes I + (warp Jacobian)
/// strictly diagonally dominant and the map globally invertible.
class Diffeomorphism {
 public:
  enum class Kind { identity, linear, sine_warp, composition };

  static Diffeomorphism identity(int dim);
  static Diffeomorphism linear(const Mat& matrix);
  static Diffeomorphism sine_warp(int dim, std::vector<SineTerm> terms);
  /// Applies `first`, then `second`.
  static Diffeomorphism compose(const Diffeomorphism& first, const Diffeomorphism& second);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_linear() const { return kind_ == Kind::identity || kind_ == Kind::linear || linear_composite_; }
  /// The matrix of a linear (or identity, or linear-composite) map.
  const Mat& matrix() const;
  const std::vector<SineTerm>& terms() const { return terms_; }

  Vec forward(const Vec& t) const;
  Mat jacobian(const Vec& t) const;
  std::vector<Mat> coordinate_hessians(const Vec& t) const;
  MapJet jet(const Vec& t) const;
  double abs_det_jacobian(const Vec& t) const;

  /// Exact for linear maps; damped Newton otherwise (to 1e-13 relative).
  Vec inverse(const Vec& image) const;

  /// Upper bound on |B(t) e_axis| over all t.
  double column_norm_bound(int axis) const;
  /// Upper bound on the operator 2-norm of B(t) over all t.
  double operator_norm_bound() const;

 private:
  Diffeomorphism(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Mat matrix_;
  Mat inverse_matrix_;
  std::vector<SineTerm> terms_;
  std::vector<std::shared_ptr<const Diffeomorphism>> parts_;
  bool linear_composite_ = false;
};

}  // namespace gfcrit
