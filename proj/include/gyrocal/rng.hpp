#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gyrocal {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed derivation rule shared by every generator in the library:
///   h = 0; for each part v: h = splitmix64(h ^ v)
/// A recording's axis stream is derive_seed({master, gyro, recording, axis}),
/// built up one level at a time.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Portable random stream over std::mt19937_64.
///
/// The standard distributions are implementation-defined, so the transforms
/// are fixed here:
///   uniform01()  = (u >> 11) * 2^-53                      in [0, 1)
///   open01()     = ((u >> 11) + 0.5) * 2^-53              in (0, 1)
///   normal()     = sqrt(-2 ln a) * cos(2 pi b), a = open01(), b = open01()
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double open01();
  double normal();
  /// Uniform integer in [0, n) by rejection, n >= 1.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gyrocal
