#pragma once

// Shared generators and reference implementations for the test suites. The
// references here are written independently of core/ and are the oracles the
// engine is checked against.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace edecoh_test {

/// Seeded source of random test inputs.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

 private:
  std::mt19937_64 rng_;
};

/// Number of random cases per property.
inline constexpr int kCases = 200;

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// E1 by its power series below 1 and the modified-Lentz continued fraction
/// above.
inline double e1_reference(double x) {
  if (x <= 1.0) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k < 60; ++k) {
      term *= -x / k;
      sum -= term / k;
    }
    return -kEulerGamma - std::log(x) + sum;
  }
  const double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

struct PlaneState {
  double y;
  double vy;
};

/// Classical RK4 for y'' = -k / y^2 over `duration` in n equal steps.
inline PlaneState rk4_image_force(PlaneState s, double k, double duration, int n) {
  const double h = duration / n;
  auto acc = [k](double y) { return -k / (y * y); };
  for (int i = 0; i < n; ++i) {
    const double k1y = s.vy, k1v = acc(s.y);
    const double k2y = s.vy + 0.5 * h * k1v, k2v = acc(s.y + 0.5 * h * k1y);
    const double k3y = s.vy + 0.5 * h * k2v, k3v = acc(s.y + 0.5 * h * k2y);
    const double k4y = s.vy + h * k3v, k4v = acc(s.y + h * k3y);
    s.y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
    s.vy += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return s;
}

/// Richardson extrapolation of two RK4 runs (n and 2n steps).
inline PlaneState rk4_richardson(PlaneState s, double k, double duration, int n) {
  const auto coarse = rk4_image_force(s, k, duration, n);
  const auto fine = rk4_image_force(s, k, duration, 2 * n);
  return {(16.0 * fine.y - coarse.y) / 15.0, (16.0 * fine.vy - coarse.vy) / 15.0};
}

/// FWHM of a*exp(-u^2/2c1^2) + (1-a)*exp(-u^2/2c2^2) by scanning a dense grid
/// and interpolating linearly at the half-maximum crossing.
inline double fwhm_dense_scan(double a, double c1, double c2, std::size_t points = 2000001) {
  auto g = [&](double u) {
    return a * std::exp(-u * u / (2 * c1 * c1)) + (1 - a) * std::exp(-u * u / (2 * c2 * c2));
  };
  const double half = 0.5 * g(0.0);
  const double span = 3.0 * std::max(c1, c2);
  const double h = span / static_cast<double>(points - 1);
  double prev = g(0.0);
  for (std::size_t i = 1; i < points; ++i) {
    const double u = static_cast<double>(i) * h;
    const double cur = g(u);
    if (cur < half) {
      const double frac = (prev - half) / (prev - cur);
      return 2.0 * (u - h + frac * h);
    }
    prev = cur;
  }
  return NAN;
}

/// Max |a - b| / max |b|.
inline double max_norm_relative(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    peak = std::max(peak, std::abs(b[i]));
  }
  return peak > 0.0 ? diff / peak : diff;
}

}  // namespace edecoh_test
