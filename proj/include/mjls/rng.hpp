#pragma once

#include <cmath>
#include <cstdint>

namespace mjls {

// splitmix64 finalizer
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based generator keyed by (seed, stream). Streams derived from
// the same seed are independent, and the draw sequence depends only on
// the key and the draw counter, so parallel scheduling order cannot
// change any path's numbers.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream)
      : key1_(mix64(seed ^ 0x8f1bbcdcbfa53e0bull) ^ mix64(stream)),
        key2_(mix64(key1_ ^ 0xd6e8feb86659fd93ull)) {}

  uint64_t next_u64() {
    uint64_t v = counter_++;
    v = mix64(v + key1_);
    return mix64(v ^ key2_);
  }

  // uniform in (0, 1]
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  uint64_t key1_;
  uint64_t key2_;
  uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mjls
