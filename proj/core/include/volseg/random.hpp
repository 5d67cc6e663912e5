#pragma once

#include <cstdint>
#include <random>

namespace volseg {

/// Seeded MT19937-64 stream with portable draw helpers.
///
/// The engine output sequence is fixed by the C++ standard. The draw helpers
/// below are implemented here rather than through <random> distributions,
/// whose algorithms are implementation-defined, so a seed reproduces the
/// same draws with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased by rejection. n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; consumes two engine draws per call.
  double normal();

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive independent per-case seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t case_seed(std::uint64_t seed, std::uint64_t case_index) {
  return seed ^ mix64(case_index);
}

}  // namespace volseg
