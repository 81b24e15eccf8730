#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace titepk {

// splitmix64 finalizer, used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a stream key from a master seed and a path of counters such as
// (trial index, chain index). Equal paths give equal streams regardless of
// the order in which streams are created, so serial and threaded runs agree.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix64(seed);
  for (std::uint64_t p : path) key = mix64(key ^ mix64(p + 0x632be59bd9b4e019ULL));
  return key;
}

// xoshiro256** generator with hand-rolled distributions, so draws are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t key) {
    std::uint64_t z = key;
    for (auto& s : state_) {
      z = mix64(z);
      s = z;
    }
  }
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) : Rng(stream_key(seed, path)) {}

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

  // Standard normal via the Marsaglia polar method.
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

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace titepk
