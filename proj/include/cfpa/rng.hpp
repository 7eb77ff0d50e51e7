#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace cfpa {

// Substream tags. Every random quantity in the pipeline is drawn from a
// generator keyed by (seed, purpose, indices...), so a link's draws never
// depend on how many other links exist or on iteration order.
enum class Stream : std::uint64_t {
  Geometry = 1,
  Channel = 2,
  PilotNoise = 3,
  SolverInit = 4,
};

std::uint64_t mix_seed(std::uint64_t seed, Stream purpose,
                       std::initializer_list<std::uint64_t> indices = {});

inline std::mt19937_64 substream(std::uint64_t seed, Stream purpose,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  return std::mt19937_64(mix_seed(seed, purpose, indices));
}

/// Draws from CN(0, 1): independent real and imaginary parts of variance 1/2.
class ComplexNormal {
 public:
  template <class Engine>
  std::complex<double> operator()(Engine& engine) {
    const double re = normal_(engine);
    const double im = normal_(engine);
    return {re, im};
  }

 private:
  std::normal_distribution<double> normal_{0.0, 0.70710678118654752440};
};

}  // namespace cfpa
