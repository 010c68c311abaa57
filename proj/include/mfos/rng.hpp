#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfos {

// Philox4x32-10. Stateless: output is a pure function
// of (key, counter), so any (seed, particle, step) draw can be produced in any
// order by any thread.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Stream of draws addressed by (seed, a, b, c). `a` is typically a particle
/// index, `b` a time step, `c` a sub-stream (coordinate block, purpose tag).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::array<std::uint32_t, 4> block(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    return Philox4x32::apply({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b, c}, key_);
  }

  /// Two uniforms in the open interval (0,1) with 53-bit resolution.
  std::array<double, 2> uniform2(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    const auto r = block(a, b, c);
    return {to_unit((static_cast<std::uint64_t>(r[0]) << 32) | r[1]),
            to_unit((static_cast<std::uint64_t>(r[2]) << 32) | r[3])};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normal2(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    const auto u = uniform2(a, b, c);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double th = 2.0 * std::numbers::pi * u[1];
    return {r * std::cos(th), r * std::sin(th)};
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    const double u = uniform2(a, b, c)[0];
    const auto k = static_cast<std::uint64_t>(u * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  static double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
};

/// SplitMix64 finalizer; derives independent seeds for sub-computations.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace mfos
