#ifndef UDA_RNG_HPP
#define UDA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace uda {

// SplitMix64 (Steele, Lea, Flood 2014). All randomness in the project flows
// through this generator so that ports in other languages can reproduce
// every stream bit-for-bit:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Top 53 bits scaled to [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, bound) via 128-bit multiply-high, no rejection step.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Box-Muller, cosine branch only: one normal per two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

// Independent stream for (seed, tag, index): the seed of the stream is the
// first SplitMix64 output of seed ^ mix(tag) ^ mix(index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  SplitMix64 t(tag), i(index + 0x51ED270B27A1B1C5ULL);
  SplitMix64 s(seed ^ t.next() ^ i.next());
  return s.next();
}

namespace stream {
inline constexpr std::uint64_t kClassMeans = 1;
inline constexpr std::uint64_t kSourceSamples = 2;
inline constexpr std::uint64_t kTargetSamples = 3;
inline constexpr std::uint64_t kShift = 4;
inline constexpr std::uint64_t kShuffleSource = 5;
inline constexpr std::uint64_t kShuffleTarget = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kShuffle = 8;
}  // namespace stream

}  // namespace uda

#endif  // UDA_RNG_HPP
