#pragma once

#include <cstddef>

namespace mmdial::detail {

// Products of two floats are exact in double, so the only rounding is the
// in-order accumulation. Every search path must go through this function.
inline double dot(const float* a, const float* b, std::size_t d) {
  double sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) sum += static_cast<double>(a[j]) * static_cast<double>(b[j]);
  return sum;
}

}  // namespace mmdial::detail
