#include "mcqa/stable_hash.hpp"

namespace mcqa {

namespace {
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
}

StableHash& StableHash::add(std::string_view s) {
  add(static_cast<std::uint64_t>(s.size()));
  for (unsigned char c : s) {
    state_ = (state_ ^ c) * kFnvPrime;
  }
  return *this;
}

StableHash& StableHash::add(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    state_ = (state_ ^ ((v >> (8 * i)) & 0xFF)) * kFnvPrime;
  }
  return *this;
}

std::uint64_t stable_hash(std::string_view s) { return StableHash().add(s).value(); }

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound <= 1) {
    return 0;
  }
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  while (true) {
    const std::uint64_t v = next();
    if (v < limit) {
      return v % bound;
    }
  }
}

}  // namespace mcqa
