#pragma once

#include <cmath>
#include <limits>

#include "mlsar/error.hpp"
#include "mlsar/random.hpp"

namespace mlsar {

struct SliceSettings {
  double step_width = 0.25;
  int max_steps = 100;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// One univariate slice-sampling transition (stepping out, then shrinkage)
/// leaving the density exp(log_density) invariant. The bracket is clipped to
/// (settings.lower, settings.upper); log_density is never evaluated outside.
template <typename LogDensity>
double slice_sample(double x0, LogDensity&& log_density, Rng& rng,
                    const SliceSettings& settings) {
  const double log_f0 = log_density(x0);
  if (!std::isfinite(log_f0))
    throw NumericalError("slice sampler: target density is zero at the current point");

  // Auxiliary height u ~ U(0, f(x0)), kept on the log scale.
  const double log_height = log_f0 - rng.exponential();

  const double w = settings.step_width;
  double left = x0 - w * rng.uniform();
  double right = left + w;
  int steps_left = static_cast<int>(std::floor(settings.max_steps * rng.uniform()));
  int steps_right = settings.max_steps - 1 - steps_left;
  while (steps_left > 0 && left > settings.lower && log_density(left) > log_height) {
    left -= w;
    --steps_left;
  }
  while (steps_right > 0 && right < settings.upper && log_density(right) > log_height) {
    right += w;
    --steps_right;
  }
  left = std::max(left, settings.lower);
  right = std::min(right, settings.upper);

  for (int shrink = 0; shrink < 1000; ++shrink) {
    const double x1 = left + rng.uniform() * (right - left);
    if (x1 > settings.lower && x1 < settings.upper && log_density(x1) > log_height) return x1;
    if (x1 < x0)
      left = x1;
    else
      right = x1;
  }
  throw NumericalError("slice sampler: shrinkage did not terminate");
}

}  // namespace mlsar
