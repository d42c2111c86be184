#pragma once

// Counter-based random streams. Every simulation cycle owns an independent
// substream derived from (seed, phase, cycle index), so results do not
// depend on how cycles are distributed over worker threads.

#include <array>
#include <cstdint>

namespace dftmc {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Uniform variates for one simulation cycle.
///
/// Counter layout: {block, phase, cycle low word, cycle high word}; the key
/// is the 64-bit seed. Each Philox block yields two doubles.
class CycleStream {
 public:
  CycleStream(std::uint64_t seed, std::uint32_t phase, std::uint64_t cycle)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, phase, static_cast<std::uint32_t>(cycle), static_cast<std::uint32_t>(cycle >> 32)} {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (pos_ == 2) refill();
    const std::uint64_t bits = buf_[pos_++];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  void refill() {
    const Philox4x32::Counter out = Philox4x32::generate(ctr_, key_);
    ++ctr_[0];
    buf_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buf_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    pos_ = 0;
  }

  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  std::array<std::uint64_t, 2> buf_{};
  int pos_ = 2;
};

}  // namespace dftmc
