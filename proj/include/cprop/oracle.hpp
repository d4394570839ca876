#pragma once

#include <cstdint>
#include <span>
#include <vector>

// Brute-force estimators of the conformity scale, independent of the
// EMA pipeline: an exact full-history statistics path and a bootstrap
// resampling path. These exist to validate the Normal-CDF shortcut.
// Pure functions over immutable traces; resamples map to fixed
// per-index streams, so results do not depend on evaluation order.

namespace cprop {

// Append-only history of one coordinate's gradients.
struct GradientTrace {
  std::vector<double> values;

  void append(double g) { values.push_back(g); }
  std::size_t length() const { return values.size(); }
};

// Full-history scale with exact sums: sample mean, Bessel-corrected
// variance, sigma = sqrt(var/n) + eps, then the Normal-CDF scale with
// c = 1. No EMA, no effective-count estimate. Requires length >= 2.
double exact_full_history_scale(const GradientTrace& trace, double epsilon);

// Resampling estimate: draws n_resamples bootstrap means (with
// replacement, full trace length), takes p_neg as the fraction of means
// below zero, and returns min(2c|p_neg - 0.5|, 1). Each resample uses
// its own stream derived from (seed, resample index), so the result is
// deterministic regardless of evaluation order. Requires length >= 2
// and n_resamples >= 100.
double bootstrap_scale(const GradientTrace& trace, int n_resamples, std::uint64_t seed, double c);

}  // namespace cprop
