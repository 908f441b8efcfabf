#pragma once

#include <cstdint>
#include <vector>

#include "tsinception/error.hpp"

namespace tsinception {

// deterministic 64-bit generator (splitmix64, Steele et al.).
// the stream depends only on the seed, never on the platform: fixed
// constants, fixed-width unsigned arithmetic, and an explicit 53-bit
// mapping to doubles. the same seed yields the same values everywhere.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53 random bits
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform in [0, n), rejection-sampled so every value is equally likely
  int next_int(int n) {
    check(n > 0, "rng: next_int bound must be positive, got ", n);
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<int>(r % un);
  }

  // derive an independent child stream; children of distinct tags (or of
  // distinct parent seeds) do not overlap in practice.
  Rng split(std::uint64_t tag) const {
    Rng mixer(state ^ (0xA0761D6478BD642FULL + tag * 0xE7037ED1A0B428DBULL));
    return Rng(mixer.next_u64());
  }
};

// fisher-yates shuffle driven by the deterministic generator
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = rng.next_int(i + 1);
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
  }
}

}  // namespace tsinception
