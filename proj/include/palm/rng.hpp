#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace palm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded xoshiro256++ stream. All sampling in the library goes through this
/// type so that a (seed, stream label) pair fully determines every draw,
/// independent of platform or standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  /// Independent substream derived from this stream's seed and a label.
  /// Forking is stateless: fork(i) yields the same stream no matter how many
  /// values were drawn from the parent.
  Rng fork(std::uint64_t label) const {
    std::uint64_t s = seed_ + 0x9e3779b97f4a7c15ULL * (label + 1);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return Rng(a ^ (b << 1));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be > 0");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Integer in [0, n) by 128-bit multiply-shift; bias is O(n / 2^64),
  /// ignorable for Monte Carlo sampling loops.
  std::uint64_t bounded_fast(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double exponential(double rate = 1.0) {
    if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform_pos()) / rate;
  }

  /// Poisson count by accumulating unit-rate exponential arrivals up to
  /// `mean`; numerically safe for the moderate means used here.
  long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: mean must be >= 0");
    if (mean > 1e6) throw std::invalid_argument("poisson: mean too large");
    long k = 0;
    double acc = 0.0;
    for (;;) {
      acc += exponential();
      if (acc > mean) return k;
      ++k;
    }
  }

  /// Index in [0, weights.size()) with probability proportional to weights.
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("weighted_index: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("weighted_index: zero total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

}  // namespace palm
