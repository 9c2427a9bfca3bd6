#pragma once
// Counter-based random streams (Philox4x32-10) with per-trajectory keys.
//
// A trajectory's stream is fully determined by its 64-bit key, so the same
// (master seed, trajectory index) pair reproduces the same numbers no matter
// which worker runs it. Variate transforms are written out here instead of
// using <random> distributions, whose algorithms are implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace qtraj {

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Key of trajectory `index` under `master_seed`:
///   mix64(mix64(master_seed) ^ mix64(index + 0x9E3779B97F4A7C15)).
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return mix64(mix64(master_seed) ^ mix64(index + 0x9E3779B97F4A7C15ULL));
}

namespace philox {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kM0 = 0xD2511F53u;
inline constexpr std::uint32_t kM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kW1 = 0xBB67AE85u;

constexpr Block round(const Block& c, const Key& k) {
  const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

/// Philox4x32 with 10 rounds.
constexpr Block philox4x32_10(Block ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    ctr = round(ctr, key);
  }
  return ctr;
}

}  // namespace philox

class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  result_type operator()() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open_zero()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    const philox::Block ctr{static_cast<std::uint32_t>(block_),
                            static_cast<std::uint32_t>(block_ >> 32), 0u, 0u};
    buf_ = philox::philox4x32_10(ctr, key_);
    ++block_;
    pos_ = 0;
  }

  philox::Key key_;
  std::uint64_t block_ = 0;
  philox::Block buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qtraj
