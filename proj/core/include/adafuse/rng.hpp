#pragma once

#include <cstdint>
#include <random>

namespace adafuse {

// splitmix64 finalizer; decorrelates seeds for derived streams.
std::uint64_t mix64(std::uint64_t x);

// Deterministic random stream on top of std::mt19937_64 (whose output
// sequence is fixed by the standard). All transforms below are implemented
// by hand instead of std::*_distribution, which is not portable across
// standard libraries. Engine draws consumed per call:
//   uniform01 / uniform01_open_low / uniform : exactly 1
//   uniform_index                             : >= 1 (rejection sampling)
//   gaussian                                  : exactly 2 (Box-Muller, cosine branch)
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Decorrelated child stream, e.g. one per dialogue.
  static Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix64(mix64(seed) ^ mix64(stream_id + 0x9E3779B97F4A7C15ull)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform01_open_low() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased integer in [0, n); n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal draw.
  double gaussian();

private:
  std::mt19937_64 engine_;
};

} // namespace adafuse
