#include "cprop/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "cprop/conformity.hpp"
#include "cprop/rng.hpp"

namespace cprop {

double exact_full_history_scale(const GradientTrace& trace, double epsilon) {
  const std::size_t n = trace.length();
  if (n < 2) throw std::invalid_argument("exact_full_history_scale: need at least 2 gradients");
  double mean = 0.0;
  for (double g : trace.values) mean += g;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double g : trace.values) var += (g - mean) * (g - mean);
  var /= static_cast<double>(n - 1);
  const double sigma = std::sqrt(var / static_cast<double>(n)) + epsilon;
  const double p_neg = sign_confidence_scalar(mean, sigma);
  return std::min(2.0 * std::abs(p_neg - 0.5), 1.0);
}

double bootstrap_scale(const GradientTrace& trace, int n_resamples, std::uint64_t seed,
                       double c) {
  const std::size_t n = trace.length();
  if (n < 2) throw std::invalid_argument("bootstrap_scale: need at least 2 gradients");
  if (n_resamples < 100) throw std::invalid_argument("bootstrap_scale: need >= 100 resamples");

  // Zero-sum resamples count half toward each side, and the deviation
  // |p_neg - 0.5| is computed straight from the counts, so negating the
  // trace (which negates every resample sum bitwise) gives the exact
  // same scale.
  double twice_below = 0.0;
  for (int r = 0; r < n_resamples; ++r) {
    SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += trace.values[rng.below(n)];
    if (sum < 0.0)
      twice_below += 2.0;
    else if (sum == 0.0)
      twice_below += 1.0;
  }
  const double deviation =
      std::abs(twice_below - n_resamples) / (2.0 * static_cast<double>(n_resamples));
  return std::min(2.0 * c * deviation, 1.0);
}

}  // namespace cprop
