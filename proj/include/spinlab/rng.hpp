#pragma once
//
// Counter-based random numbers.
//
// Every random quantity in the library is a pure function of a 64-bit key and
// a 128-bit counter, so values can be regenerated in isolation and do not
// depend on evaluation order or thread count. The block function is
// Philox4x32-10 (Salmon et al., SC'11).
//

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace spinlab {

using Counter = std::array<std::uint32_t, 4>;

class Philox4x32 {
 public:
  static constexpr Counter generate(Counter ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a, used to turn purpose strings into derivation tags.
constexpr std::uint64_t hash_tag(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derive a child seed from a parent and an ordered list of tags.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(parent);
  std::uint64_t position = 1;
  for (std::uint64_t t : tags) {
    h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ull * position));
    ++position;
  }
  return h;
}

// Uniform on the open interval (0, 1) from 52 random bits; every value is
// exactly representable, so neither end is reachable by rounding.
constexpr double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)}, seed_(key) {}

  constexpr std::uint64_t seed() const { return seed_; }

  constexpr Counter block(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3) const {
    return Philox4x32::generate({c0, c1, c2, c3}, key_);
  }

  double uniform(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2 = 0, std::uint32_t c3 = 0) const {
    const Counter w = block(c0, c1, c2, c3);
    return to_open_unit((std::uint64_t{w[1]} << 32) | w[0]);
  }

  // Standard normal by Box-Muller on one block.
  double normal(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2 = 0, std::uint32_t c3 = 0) const {
    const Counter w = block(c0, c1, c2, c3);
    const double u1 = to_open_unit((std::uint64_t{w[1]} << 32) | w[0]);
    const double u2 = to_open_unit((std::uint64_t{w[3]} << 32) | w[2]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t seed_;
};

// Randomness available to a single draw (one matrix entry, one Monte Carlo
// sample). Sub-index k selects independent variates within the draw.
class DrawSource {
 public:
  DrawSource(const CounterRng& rng, std::uint32_t a, std::uint32_t b) : rng_(&rng), a_(a), b_(b) {}

  double uniform(std::uint32_t k = 0) const { return rng_->uniform(a_, b_, k, 0); }
  double normal(std::uint32_t k = 0) const { return rng_->normal(a_, b_, k, 1); }
  std::uint32_t bits(std::uint32_t k = 0) const { return rng_->block(a_, b_, k, 2)[0]; }

 private:
  const CounterRng* rng_;
  std::uint32_t a_;
  std::uint32_t b_;
};

}  // namespace spinlab
