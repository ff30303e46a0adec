#pragma once

// Fused random-wave sums. Compiled with relaxed floating-point flags so the
// cos/sin loop vectorizes; keep non-finite handling out of this unit.

namespace gfcrit::detail {

/// Sums over k of cos(theta_k), w_k sin(theta_k) and w_k w_k^T cos(theta_k)
/// with theta_k = <w_k, t> + phase_k. `freq` is dimension-major: freq[d * waves + k].
/// hess holds the upper triangle row by row (N(N+1)/2 entries).
struct WaveSums {
  double cos_sum = 0.0;
  double sin_grad[3] = {0.0, 0.0, 0.0};
  double cos_hess[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
};

WaveSums wave_sums(const double* freq, const double* phase, int waves, int dim, const double* t,
                   bool with_hessian);

}  // namespace gfcrit::detail
