#pragma once

#include <cmath>
#include <cstdint>

namespace avica {

// Counter-based generator (SplitMix64): the i-th output is a pure function of
// seed + i * golden gamma, so draw sequences are reproducible by position.
// All samplers below consume a documented number of uniforms, which makes the
// generator's draw order part of the data-generation contract.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1); one draw.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the Box-Muller cosine branch; two draws.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Unit-variance Laplace via inverse CDF; one draw.
  double laplace_unit_variance() {
    const double u = uniform01() - 0.5;
    const double b = 0.7071067811865475244;  // scale for variance one
    return u >= 0.0 ? -b * std::log1p(-2.0 * u) : b * std::log1p(2.0 * u);
  }

  // Unit-rate exponential; one draw.
  double exponential() { return -std::log(uniform01()); }

  // Gamma(shape, 1). shape == 1 is sampled as an exponential (one draw);
  // otherwise Marsaglia-Tsang (rejection; draw count varies but is a
  // deterministic function of the counter position).
  double gamma(double shape) {
    if (shape == 1.0) return exponential();
    if (shape < 1.0) {
      const double boost = std::pow(uniform01(), 1.0 / shape);
      return gamma(shape + 1.0) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace avica
