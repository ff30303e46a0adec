#pragma once

// Independent numerical oracles shared by the test suites.

#include <cmath>
#include <functional>

#include "gfcrit/types.hpp"

namespace gfcrit::testing {

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;

/// Central-difference gradient.
inline Vec fd_gradient(const ScalarFn& f, const Vec& t, double h = 1e-5) {
  Vec g(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    Vec a = t, b = t;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector map, J_ij = d f_i / d t_j.
inline Mat fd_jacobian(const VectorFn& f, const Vec& t, double h = 1e-5) {
  const Vec f0 = f(t);
  Mat j(f0.size(), t.size());
  for (Eigen::Index c = 0; c < t.size(); ++c) {
    Vec a = t, b = t;
    a[c] += h;
    b[c] -= h;
    j.col(c) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

/// Hessian by central differences of an analytic gradient.
inline Mat fd_hessian_from_gradient(const VectorFn& grad, const Vec& t, double h = 1e-5) {
  Mat hess = fd_jacobian(grad, t, h);
  return 0.5 * (hess + hess.transpose());
}

/// Relative error |a - b| / max(|b|, floor).
inline double relative_error(const Mat& approx, const Mat& exact, double floor) {
  return (approx - exact).norm() / std::max(exact.norm(), floor);
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

/// Fourth-order central stencils for derivatives of a 1-D function at x.
inline double fd_second(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}
inline double fd_fourth(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 3 * h) + 12 * f(x + 2 * h) - 39 * f(x + h) + 56 * f(x) - 39 * f(x - h) +
          12 * f(x - 2 * h) - f(x - 3 * h)) /
         (6 * h * h * h * h);
}

}  // namespace gfcrit::testing
