#include <cmath>
#include <set>

#include "doctest.h"
#include "mfos/rng.hpp"

using namespace mfos;

TEST_SUITE("rng") {
  // Reference outputs of Philox4x32-10 from the Random123 known-answer set.
  TEST_CASE("philox known answers") {
    using C = Philox4x32::Counter;
    CHECK(Philox4x32::apply({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("draws are pure functions of the address") {
    const CounterRng a(42), b(42), c(43);
    CHECK(a.uniform2(7, 3, 1) == b.uniform2(7, 3, 1));
    CHECK(a.uniform2(7, 3, 1) != c.uniform2(7, 3, 1));
    CHECK(a.uniform2(7, 3, 1) != a.uniform2(7, 3, 2));
    CHECK(a.uniform2(7, 3, 1) != a.uniform2(8, 3, 1));
  }

  TEST_CASE("uniforms stay in the open unit interval") {
    const CounterRng r(1);
    for (std::uint64_t k = 0; k < 20000; ++k) {
      for (double u : r.uniform2(k, 0, 0)) {
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
      }
    }
  }

  TEST_CASE("normal moments") {
    const CounterRng r(2024);
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int k = 0; k < n / 2; ++k) {
      for (double z : r.normal2(k, 0, 0)) {
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
      }
    }
    // 5-sigma bands for n = 2e5.
    CHECK(std::abs(s1 / n) < 5.0 * std::sqrt(1.0 / n));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
  }

  TEST_CASE("below is in range and roughly uniform") {
    const CounterRng r(9);
    int counts[7] = {};
    for (std::uint64_t k = 0; k < 70000; ++k) {
      const auto v = r.below(7, k, 0, 0);
      REQUIRE(v < 7);
      ++counts[v];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("derived seeds do not collide on small tags") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 50; ++s) {
      for (std::uint64_t t = 0; t < 50; ++t) seen.insert(derive_seed(s, t));
    }
    CHECK(seen.size() == 2500);
  }
}
