#pragma once

#include <cstdint>
#include <string_view>

namespace mcqa {

// Platform-stable 64-bit hashing and seeded randomness. std::hash and the
// <random> distributions are not guaranteed to produce the same values
// across standard libraries, so everything that must reproduce bit-exactly
// (per-item seeds, mix draws, cache keys) goes through these.

// FNV-1a style accumulator. Values are fed with length framing so that
// ("ab","c") and ("a","bc") hash differently.
class StableHash {
 public:
  StableHash& add(std::string_view s);
  StableHash& add(std::uint64_t v);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t stable_hash(std::string_view s);

// splitmix64 finalizer; also usable to mix two 64-bit values.
std::uint64_t mix64(std::uint64_t x);

// Counter-based deterministic generator (splitmix64). Cheap to construct,
// so every draw site seeds its own instance from a StableHash key.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform in [0, bound); bound >= 1. Unbiased via rejection.
  std::uint64_t below(std::uint64_t bound);

  // Fair coin.
  bool coin() { return (next() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

}  // namespace mcqa
