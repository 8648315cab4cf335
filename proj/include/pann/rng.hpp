#pragma once

#include <cstdint>

namespace pann::rng {

// SplitMix64 finalizer.  Used both as a sequential generator and as a
// stateless counter-based hash so that independent random streams can be
// derived from (seed, purpose, index) keys.  Every random draw in the
// project goes through this; no standard-library engines or distributions
// are used, so results are bit-identical across platforms and compilers.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combine a seed with a stream label, producing the state of a derived
// stream.  Chaining mix() calls gives hierarchical keys:
//   mix(mix(seed, kInit), layer_index)
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t label) {
  return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + splitmix64(label)));
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1): 53 random mantissa bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Uniform in (0, 1); rejects exact zeros (needed before log()).
  double next_open_unit() {
    double u;
    do {
      u = next_unit();
    } while (u == 0.0);
    return u;
  }

 private:
  std::uint64_t state_;
};

// Stateless draw: uniform in [0,1) determined entirely by the key triple.
inline double unit_at(std::uint64_t seed, std::uint64_t label,
                      std::uint64_t index) {
  return static_cast<double>(splitmix64(mix(seed, label) ^
                                        splitmix64(index)) >>
                             11) *
         0x1.0p-53;
}

}  // namespace pann::rng
