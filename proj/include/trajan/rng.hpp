#pragma once

#include <cstdint>

namespace trajan {

// SplitMix64 (Steele, Lea, Flood). Used to expand user seeds into
// generator state and to derive independent per-stream seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// xorshift64* (Vigna). All synthetic datasets are drawn from this generator
// so they are reproducible by any implementation of the same algorithm.
class Xorshift64Star {
 public:
  // Seeds through SplitMix64 so that every 64-bit seed (including 0) gives a
  // valid non-zero state.
  explicit Xorshift64Star(std::uint64_t seed) {
    SplitMix64 sm(seed);
    state_ = sm.next();
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  static Xorshift64Star from_state(std::uint64_t state) {
    Xorshift64Star g(0);
    g.state_ = state;
    return g;
  }

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire's multiply-shift; bias < n / 2^64.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_ = 0;
};

}  // namespace trajan
