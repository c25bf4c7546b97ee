#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace prefscore {

// Deterministic RNG helpers. std::uniform_*_distribution and std::shuffle are
// implementation-defined, so everything that must reproduce bit-identically
// across toolchains draws through these instead.

class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
};

/// FNV-1a 64-bit hash, used for context grouping and file manifests.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// In-place Fisher-Yates shuffle driven by DetRng.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::uint64_t seed) {
  DetRng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace prefscore
