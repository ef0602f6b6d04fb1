#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace maxrank {

// 64-bit finalizer from SplitMix64 (Steele, Lea & Flood 2014; Vigna's
// public-domain implementation). Bijective on uint64, used both as the
// generator's output function and for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based generator: state advances by a fixed odd constant (a Weyl
// sequence), each output is mix64 of the counter. Output i is a pure
// function of (seed, i), which is what makes substreams cheap to derive
// and results independent of evaluation order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t operator()() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform on (0,1]; never returns 0, so it is safe under log().
  double uniform01() {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on the open interval (0,1).
  double uniform_open() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Named stream salts so independent draw sequences derived from one master
// seed can never collide.
enum class Stream : std::uint64_t {
  calibration = 0x01,
  fresh = 0x02,
  jitter = 0x03,
  conformal_trial = 0x04,
  grid_cell = 0x05,
  selftest = 0x06,
};

// Derives a substream seed by folding each key through the mixer. Keys are
// typically (stream salt, trial index) or grid cell coordinates.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  for (std::uint64_t k : keys) {
    s = mix64(s ^ mix64(k + 0x9e3779b97f4a7c15ull));
  }
  return s;
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::uint64_t index) {
  return derive_seed(seed, {static_cast<std::uint64_t>(stream), index});
}

// Standard normal draws via Box-Muller on SplitMix64 uniforms. Two
// uniforms yield two normals; the second is cached.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform01();
    const double u2 = rng_.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  SplitMix64& engine() { return rng_; }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace maxrank
