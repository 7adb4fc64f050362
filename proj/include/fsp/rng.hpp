#ifndef FSP_RNG_HPP
#define FSP_RNG_HPP

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace fsp {

// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so seeded runs would not reproduce across standard libraries. These helpers
// pin the exact draw sequence to the mt19937_64 stream.

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  // rejection sampling, no modulo bias
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
  return lo + u * (hi - lo);
}

}  // namespace fsp

#endif
