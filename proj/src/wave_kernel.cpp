#include "wave_kernel.hpp"

#include <cmath>

namespace gfcrit::detail {

namespace {

// sin(x) as cos(x - pi/2): GCC otherwise fuses sin and cos into a scalar
// sincos call and the loop loses its vector math calls.
constexpr double kHalfPi = 1.57079632679489661923;

template <int N>
WaveSums sums_value_gradient(const double* freq, const double* phase, int waves, const double* t) {
  double v = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0;
  const double* w0 = freq;
  const double* w1 = freq + waves;
  const double* w2 = freq + 2 * waves;
  const double t0 = t[0];
  const double t1 = N > 1 ? t[1] : 0.0;
  const double t2 = N > 2 ? t[2] : 0.0;
#pragma omp simd reduction(+ : v, g0, g1, g2)
  for (int k = 0; k < waves; ++k) {
    double theta = phase[k] + w0[k] * t0;
    if constexpr (N > 1) theta += w1[k] * t1;
    if constexpr (N > 2) theta += w2[k] * t2;
    const double c = std::cos(theta);
    const double s = std::cos(theta - kHalfPi);
    v += c;
    g0 += w0[k] * s;
    if constexpr (N > 1) g1 += w1[k] * s;
    if constexpr (N > 2) g2 += w2[k] * s;
  }
  WaveSums out;
  out.cos_sum = v;
  out.sin_grad[0] = g0;
  out.sin_grad[1] = g1;
  out.sin_grad[2] = g2;
  return out;
}

template <int N>
WaveSums sums_full(const double* freq, const double* phase, int waves, const double* t) {
  double v = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0;
  double h00 = 0.0, h01 = 0.0, h02 = 0.0, h11 = 0.0, h12 = 0.0, h22 = 0.0;
  const double* w0 = freq;
  const double* w1 = freq + waves;
  const double* w2 = freq + 2 * waves;
  const double t0 = t[0];
  const double t1 = N > 1 ? t[1] : 0.0;
  const double t2 = N > 2 ? t[2] : 0.0;
#pragma omp simd reduction(+ : v, g0, g1, g2, h00, h01, h02, h11, h12, h22)
  for (int k = 0; k < waves; ++k) {
    double theta = phase[k] + w0[k] * t0;
    if constexpr (N > 1) theta += w1[k] * t1;
    if constexpr (N > 2) theta += w2[k] * t2;
    const double c = std::cos(theta);
    const double s = std::cos(theta - kHalfPi);
    v += c;
    g0 += w0[k] * s;
    h00 += w0[k] * w0[k] * c;
    if constexpr (N > 1) {
      g1 += w1[k] * s;
      h01 += w0[k] * w1[k] * c;
      h11 += w1[k] * w1[k] * c;
    }
    if constexpr (N > 2) {
      g2 += w2[k] * s;
      h02 += w0[k] * w2[k] * c;
      h12 += w1[k] * w2[k] * c;
      h22 += w2[k] * w2[k] * c;
    }
  }
  WaveSums out;
  out.cos_sum = v;
  out.sin_grad[0] = g0;
  out.sin_grad[1] = g1;
  out.sin_grad[2] = g2;
  if constexpr (N == 1) {
    out.cos_hess[0] = h00;
  } else if constexpr (N == 2) {
    out.cos_hess[0] = h00;
    out.cos_hess[1] = h01;
    out.cos_hess[2] = h11;
  } else {
    out.cos_hess[0] = h00;
    out.cos_hess[1] = h01;
    out.cos_hess[2] = h02;
    out.cos_hess[3] = h11;
    out.cos_hess[4] = h12;
    out.cos_hess[5] = h22;
  }
  return out;
}

}  // namespace

WaveSums wave_sums(const double* freq, const double* phase, int waves, int dim, const double* t,
                   bool with_hessian) {
  switch (dim) {
    case 1:
      return with_hessian ? sums_full<1>(freq, phase, waves, t) : sums_value_gradient<1>(freq, phase, waves, t);
    case 2:
      return with_hessian ? sums_full<2>(freq, phase, waves, t) : sums_value_gradient<2>(freq, phase, waves, t);
    default:
      return with_hessian ? sums_full<3>(freq, phase, waves, t) : sums_value_gradient<3>(freq, phase, waves, t);
  }
}

}  // namespace gfcrit::detail
