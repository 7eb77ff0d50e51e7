#pragma once

namespace cfpa {

/// Huber-style smoothing of r = ||x_l||_2 with knee `mu`.
///
/// `gradient_factor` is the scalar c such that the gradient of psi(||x_l||)
/// with respect to x_l equals c * x_l.
struct SmoothedNorm {
  double value = 0.0;
  double gradient_factor = 0.0;
};

inline SmoothedNorm smoothed_norm(double r, double mu) {
  if (r == 0.0) return {};
  if (r <= mu) return {r * r / (2.0 * mu), 1.0 / mu};
  return {r - mu / 2.0, 1.0 / r};
}

}  // namespace cfpa
