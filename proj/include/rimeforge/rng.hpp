#pragma once

// Counter-based splittable PRNG.
//
// Every stream is addressable as (seed, stream_id): the stream base is
// base = mix64(seed ^ mix64(stream_id)), and draw number i is
// mix64(base + i * GAMMA) with the SplitMix64 finalizer. Draws are pure
// functions of (seed, stream_id, counter), so any point in any stream can
// be reconstructed without replaying earlier draws, and derived streams
// never overlap their parent.

#include <cstdint>
#include <limits>

namespace rimeforge {

inline constexpr uint64_t kRngGamma = 0x9e3779b97f4a7c15ull;

constexpr uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Stable 64-bit hash for deriving stream ids from strings.
constexpr uint64_t hash_str(const char* s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  while (*s) {
    h ^= static_cast<unsigned char>(*s++);
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(uint64_t seed, uint64_t stream)
      : base_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ull))) {}

  // Independent child stream; (tag) draws never collide with this stream's.
  Rng split(uint64_t tag) const { return Rng(base_, mix64(tag) ^ 0x9e6c63d0876a9a47ull); }

  uint64_t next_u64() { return mix64(base_ + (++counter_) * kRngGamma); }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n) via rejection.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  bool next_bernoulli(double p) { return next_double() < p; }

 private:
  uint64_t base_;
  uint64_t counter_ = 0;
};

}  // namespace rimeforge
