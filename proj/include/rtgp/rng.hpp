#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rtgp {

// Counter-based PRNG (Philox 4x32-10). A generator is keyed by
// (seed, stream id); distinct stream ids give statistically independent
// sequences, so parallel replicas each own a stream and never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent child stream; tag disambiguates call sites. Mixing is
  // bijective per tag, collisions across (stream, tag) pairs behave as for
  // a 64-bit hash.
  Rng child(std::uint64_t tag) const { return Rng(seed_, mix64(stream_ ^ mix64(tag))); }

  std::uint32_t next_u32() {
    if (block_pos_ == 4) refill();
    return block_[block_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // ±1 with equal probability.
  double rademacher() { return (next_u32() & 1u) ? 1.0 : -1.0; }

 private:
  static std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  void refill() {
    std::array<std::uint32_t, 4> c = {
        static_cast<std::uint32_t>(counter_),
        static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_),
        static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> k = {static_cast<std::uint32_t>(seed_),
                                      static_cast<std::uint32_t>(seed_ >> 32)};
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = 0xD2511F53ull * c[0];
      std::uint64_t p1 = 0xCD9E8D57ull * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
           static_cast<std::uint32_t>(p0)};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    block_ = c;
    block_pos_ = 0;
    ++counter_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace rtgp
