#include "gyrocal/rng.hpp"

#include <cmath>
#include <numbers>

namespace gyrocal {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0;
  for (std::uint64_t v : parts) h = splitmix64(h ^ v);
  return h;
}

double RandomStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::open01() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double a = open01();
  const double b = open01();
  return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * std::numbers::pi * b);
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  // reject the partial block at the top so u % n is unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t u;
  do {
    u = engine_();
  } while (u >= limit);
  return u % n;
}

}  // namespace gyrocal
