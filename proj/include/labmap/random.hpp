#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace labmap {

// All stochastic code draws from a seeded 64-bit Mersenne twister.
// Uniforms and categoricals are computed here rather than through the
// <random> distributions so draws do not depend on the standard library
// implementation.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Index drawn proportionally to nonnegative weights with the given total.
inline std::size_t sample_categorical(std::span<const double> weights, double total, Rng& rng) {
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  // rounding: fall back to the last positive weight
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

inline std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  return sample_categorical(weights, total, rng);
}

double sample_gamma(double shape, Rng& rng);
double sample_standard_normal(Rng& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);
std::uint32_t sample_poisson(double mean, Rng& rng);

}  // namespace labmap
