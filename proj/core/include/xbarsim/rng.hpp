#pragma once

#include <cmath>
#include <cstdint>

namespace xbarsim {

/// Counter-based RNG: a stateless hash of (key..., counter) producing
/// uniform and Gaussian doubles. Draws depend only on the key material,
/// never on call order, so per-device noise is reproducible under any
/// parallel schedule.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0,
             std::uint64_t stream_c = 0)
      : key_(mix(mix(mix(mix(0x9e3779b97f4a7c15ull ^ seed, stream_a), stream_b),
                     stream_c),
                 0)) {}

  /// Uniform in [0, 1).
  double uniform() { return to_unit(next()); }

  /// Standard normal via Box-Muller.
  double gaussian() {
    // u1 in (0,1] so log() is finite.
    double u1 = 1.0 - to_unit(next());
    double u2 = to_unit(next());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    // splitmix64 finalizer over an accumulating state.
    h += 0x9e3779b97f4a7c15ull + v;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
  }

  std::uint64_t next() { return mix(key_, ++counter_); }

  static double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace xbarsim
