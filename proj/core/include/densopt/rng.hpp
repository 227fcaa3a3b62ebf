#pragma once

#include <cstdint>
#include <random>

namespace densopt {

/// Deterministic RNG: mt19937_64 core (bit-stable across platforms) with
/// hand-rolled real-valued transforms. std::*_distribution is avoided on
/// purpose: its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Substream for sample `index` of stream `seed`; parallel and serial
  /// Monte-Carlo runs agree because each sample owns its substream.
  static Rng substream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the polar (Marsaglia) method.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace densopt
