#pragma once

// Counter-based random streams (Philox4x32-10).
//
// A stream is addressed by (seed, path, step); draws within a step advance the
// low counter word. Any path/step can therefore be regenerated independently
// of execution order, which makes parallel Monte Carlo bit-reproducible.

#include <array>
#include <cstdint>
#include <limits>

namespace volterra_lift {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// UniformRandomBitGenerator over the Philox block sequence of one (seed, path, step) address.
class CounterStream {
 public:
  using result_type = std::uint32_t;

  CounterStream(std::uint64_t seed, std::uint64_t path, std::uint32_t step) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        base_{0u, step, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept {
    const std::uint64_t hi = (*this)() >> 5;  // 27 bits
    const std::uint64_t lo = (*this)() >> 6;  // 26 bits
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
  }

 private:
  void refill() noexcept {
    auto ctr = base_;
    ctr[0] = block_index_++;
    block_ = Philox4x32::generate(ctr, key_);
    pos_ = 0;
  }

  Philox4x32::Key key_;
  Philox4x32::Counter base_;
  Philox4x32::Counter block_{};
  std::uint32_t block_index_ = 0;
  int pos_ = 4;
};

}  // namespace volterra_lift
