#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "fedcontrol/errors.hpp"

namespace fedcontrol {

// 1-based index of the first round whose accuracy reaches the threshold,
// or nullopt when no round does.
inline std::optional<int> r_threshold(std::span<const double> accuracies, double threshold) {
  if (accuracies.empty()) throw EmptyDataError("r_threshold: empty accuracy curve");
  if (!std::isfinite(threshold)) {
    throw std::invalid_argument("r_threshold: threshold must be finite");
  }
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    if (accuracies[i] >= threshold) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * standard error
};

// Sample mean with a normal-approximation 95% confidence half-width.
// Uses the n-1 variance divisor; a width needs at least two observations.
inline MeanCi mean_ci95(std::span<const double> values) {
  if (values.size() < 2) {
    throw InsufficientSamplesError("mean_ci95: a confidence interval needs >= 2 samples, got " +
                                   std::to_string(values.size()));
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;

  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

}  // namespace fedcontrol
