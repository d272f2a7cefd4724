#pragma once

#include <cstdint>
#include <limits>

namespace kdisc {

// SplitMix64 bit generator. Satisfies UniformRandomBitGenerator so it plugs
// into the <random> distributions; seeding is O(1), which lets every agent in
// every step own its own engine.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

// Index-addressed random stream. A stream is a 64-bit key; substream(i)
// derives an independent child key, so random draws are a pure function of
// (seed, path of indices) and never depend on evaluation order or threads.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) noexcept
      : key_(SplitMix64::mix(seed ^ 0x6A09E667F3BCC909ULL)) {}

  [[nodiscard]] RandomStream substream(std::uint64_t index) const noexcept {
    RandomStream child{0};
    child.key_ = SplitMix64::mix(key_ ^ SplitMix64::mix(index + 0x9E3779B97F4A7C15ULL));
    return child;
  }

  [[nodiscard]] SplitMix64 engine() const noexcept { return SplitMix64{key_}; }
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

private:
  std::uint64_t key_;
};

// Well-known child indices so that independent consumers of one seed never
// share a substream.
namespace stream_tag {
inline constexpr std::uint64_t initial = 1;
inline constexpr std::uint64_t pairing = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t batch = 4;
inline constexpr std::uint64_t ensemble = 5;
inline constexpr std::uint64_t reconstruct = 6;
} // namespace stream_tag

} // namespace kdisc
