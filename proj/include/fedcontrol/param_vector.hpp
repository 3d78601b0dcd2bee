#pragma once

#include <cmath>
#include <vector>

namespace fedcontrol {

// Flat model parameter vector. The unit everything aggregates.
using ParamVector = std::vector<double>;

inline bool all_finite(const ParamVector& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fedcontrol
