#include "cfpa/rng.hpp"

namespace cfpa {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, Stream purpose,
                       std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t idx : indices) {
    h = splitmix64(h ^ (idx + 0x632BE59BD9B4E019ULL));
  }
  return h;
}

}  // namespace cfpa
