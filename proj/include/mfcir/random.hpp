#pragma once
// Seed derivation and the Gaussian variate stream.
//
// Every random quantity in the toolkit is a pure function of a 64-bit seed:
//   * substream seeds: derive_seed(parent, index) mixes the index into the
//     parent with two rounds of the SplitMix64 finalizer;
//   * uniforms: std::mt19937_64 (bit-exact across standard libraries),
//     top 53 bits scaled to (0,1);
//   * normals: Marsaglia polar method, both variates of an accepted pair are
//     used, first the u-branch then the v-branch.
// These choices are frozen; seeded regression tests depend on them.

#include <cmath>
#include <cstdint>
#include <random>

namespace mfcir {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based split: the stream index is hashed before mixing so that
// neighbouring parents and neighbouring indices do not collide.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0xD1B54A32D192ED03ULL));
}

// Fixed stream indices used by the path builders.
namespace stream {
inline constexpr std::uint64_t brownian = 1;
inline constexpr std::uint64_t fractional = 2;
}  // namespace stream

class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0,1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mfcir
