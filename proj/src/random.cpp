#include "labmap/random.hpp"

namespace labmap {

double sample_standard_normal(Rng& rng) {
  // Marsaglia polar method
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

// Marsaglia & Tsang; shape < 1 boosted via U^(1/shape).
double sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    double u;
    do {
      u = uniform01(rng);
    } while (u == 0.0);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = sample_gamma(alpha[i], rng);
    total += out[i];
  }
  if (total <= 0.0) {
    // every component underflowed; return a vertex chosen by alpha
    std::fill(out.begin(), out.end(), 0.0);
    out[sample_categorical(alpha, rng)] = 1.0;
    return out;
  }
  for (double& x : out) x /= total;
  return out;
}

std::uint32_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    std::uint32_t k = 0;
    double p = uniform01(rng);
    while (p > limit) {
      ++k;
      p *= uniform01(rng);
    }
    return k;
  }
  // normal approximation for large means
  const double x = std::round(mean + std::sqrt(mean) * sample_standard_normal(rng));
  return x < 0.0 ? 0u : static_cast<std::uint32_t>(x);
}

}  // namespace labmap
