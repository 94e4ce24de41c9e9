#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "spinlab/rng.hpp"

using namespace spinlab;

// Published known-answer vectors for Philox4x32 with 10 rounds.
TEST_CASE("philox known answers") {
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("splitmix and fnv reference values") {
  // First SplitMix64 output from state 0.
  CHECK(mix64(0) == 0xe220a8397b1dcdafull);
  CHECK(hash_tag("") == 0xcbf29ce484222325ull);
  CHECK(hash_tag("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("derived seeds depend on parent, tags and their order") {
  const auto base = derive_seed(7, {1, 2});
  CHECK(base == derive_seed(7, {1, 2}));
  CHECK(base != derive_seed(8, {1, 2}));
  CHECK(base != derive_seed(7, {2, 1}));
  CHECK(base != derive_seed(7, {1, 2, 0}));
  CHECK(derive_seed(7, {}) != derive_seed(7, {0}));

  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(derive_seed(99, {a, b}));
  CHECK(seen.size() == 2500);
}

TEST_CASE("open unit interval excludes both ends") {
  CHECK(to_open_unit(0) > 0.0);
  CHECK(to_open_unit(~0ull) < 1.0);
  CHECK(to_open_unit(~0ull) > 0.999999);
}

TEST_CASE("counter rng is a pure function of key and counter") {
  const CounterRng a(123), b(123), c(124);
  CHECK(a.uniform(1, 2, 3, 4) == b.uniform(1, 2, 3, 4));
  CHECK(a.uniform(1, 2, 3, 4) != c.uniform(1, 2, 3, 4));
  CHECK(a.normal(5, 6) == b.normal(5, 6));
  CHECK(a.seed() == 123);
}

TEST_CASE("uniform and normal marginals") {
  const CounterRng rng(2024);
  const std::size_t n = 200000;
  std::vector<double> u(n);
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = rng.uniform(static_cast<std::uint32_t>(k), 0);
    const double z = rng.normal(static_cast<std::uint32_t>(k), 1);
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  const double dn = static_cast<double>(n);
  CHECK(std::abs(sum / dn) < 5.0 / std::sqrt(dn));
  CHECK(std::abs(sum2 / dn - 1.0) < 5.0 * std::sqrt(2.0 / dn));
  CHECK(std::abs(sum4 / dn - 3.0) < 5.0 * std::sqrt(96.0 / dn));

  std::sort(u.begin(), u.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    ks = std::max({ks, std::abs(u[k] - static_cast<double>(k) / dn), std::abs(u[k] - static_cast<double>(k + 1) / dn)});
  // 1% critical value of the Kolmogorov distribution is 1.63 / sqrt(n).
  CHECK(ks < 1.63 / std::sqrt(dn));
}

TEST_CASE("draw source sub-indices are distinct streams") {
  const CounterRng rng(5);
  const DrawSource d(rng, 3, 4);
  CHECK(d.uniform(0) != d.uniform(1));
  CHECK(d.normal(0) != d.normal(1));
  CHECK(d.uniform(0) == rng.uniform(3, 4, 0, 0));
  CHECK(d.normal(2) == rng.normal(3, 4, 2, 1));
  CHECK(d.bits(1) == rng.block(3, 4, 1, 2)[0]);
}
