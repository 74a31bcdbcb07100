#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qcwass {

using Seed = std::uint64_t;

// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Seed derive_seed(Seed master, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// Uniform draw on (0, 1]; never returns 0 so it is a valid left-quantile level.
inline double uniform_open_closed(Rng& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two (0,1] uniforms. Written out so that
// streams are identical across standard library implementations.
class NormalSource {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform_open_closed(rng);
    const double u2 = uniform_open_closed(rng);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(two_pi * u2);
    has_spare_ = true;
    return radius * std::cos(two_pi * u2);
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qcwass
