#pragma once

#include <cmath>
#include <cstdint>

namespace rcm {

// SplitMix64 finalizer (Steele/Lea/Flood; Vigna's public-domain constants).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Random access into the splitmix64 sequence: the value at counter k is a
// pure function of (seed, k), so draws are reproducible independent of
// iteration order and thread count.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
  return mix64(seed + (counter + 1) * kGolden);
}

// Decorrelated child seed for a replica / stream index.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master ^ 0x6A09E667F3BCC909ULL) + (index + 1) * kGolden);
}

// Sequential splitmix64 engine for walk simulation.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on (0,1]; never returns 0, safe for log().
  double next_open_closed() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [0,1).
  double next_half_open() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double next_exponential() { return -std::log(next_open_closed()); }

 private:
  std::uint64_t state_;
};

// Uniform (0,1] from a raw 64-bit word (counter-based sampling path).
inline double u01_open_closed(std::uint64_t v) {
  return static_cast<double>((v >> 11) + 1) * 0x1.0p-53;
}

inline double u01_half_open(std::uint64_t v) {
  return static_cast<double>(v >> 11) * 0x1.0p-53;
}

}  // namespace rcm
