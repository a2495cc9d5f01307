#pragma once

#include <cmath>
#include <random>

namespace edecoh::detail {

// Uniform [0, 1) from the top 53 bits; unlike std distributions this is the
// same on every standard library.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

// Box-Muller with one draw per call.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);  // (0, 1]
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace edecoh::detail
