#pragma once

#include <vector>

#include "gfcrit/types.hpp"

namespace gfcrit {

/// Value, gradient and Hessian of a scalar field at a point.
struct FieldJet {
  double value = 0.0;
  Vec gradient;
  Mat hessian;

  /// Copies the upper triangle onto the lower one.
  void symmetrize();
};

/// Value and gradient only; the cheap path used to scan seed grids.
struct ValueGradient {
  double value = 0.0;
  Vec gradient;
};

/// Tensor grid: one sorted coordinate list per axis. Node (i0, ..., iN-1)
/// is stored at flat index ((i0 * n1) + i1) * n2 + i2, axis 0 slowest.
struct GridAxes {
  std::vector<std::vector<double>> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  std::size_t node_count() const;
};

/// A globally defined C-infinity scalar field on R^N with exact jets.
class ScalarField {
 public:
  virtual ~ScalarField() = default;

  virtual int dim() const = 0;
  virtual FieldJet jet(const Vec& t) const = 0;
  virtual ValueGradient value_gradient(const Vec& t) const;

  /// Gradient at every grid node, N doubles per node.
  virtual std::vector<double> gradient_grid(const GridAxes& axes) const;

  /// Upper bound on the angular frequency of the field along coordinate axis d.
  virtual double axis_frequency(int axis) const = 0;
  /// Typical gradient magnitude (sqrt of gradient variance).
  virtual double gradient_scale() const = 0;
  /// Typical Hessian entry magnitude.
  virtual double hessian_scale() const = 0;
};

}  // namespace gfcrit
