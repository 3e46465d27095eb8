#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace bilinear {

/// Counter-based Philox4x32-10 generator.
///
/// A generator is fully described by a 64-bit key and a 128-bit counter, so
/// independent streams are cheap to derive: `Rng(seed).derive("noise")
/// .derive(rep)` is a pure function of its labels. Two generators with
/// different derivation paths never share a key (up to 64-bit hash
/// collisions). Satisfies UniformRandomBitGenerator. Distribution sampling is
/// implemented here rather than through <random> so that streams are
/// bit-identical across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Child stream keyed by (this key, label). Does not advance *this.
  Rng derive(std::string_view label) const noexcept;
  Rng derive(std::uint64_t index) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; the paired variate is cached.
  double normal() noexcept;
  /// +1 or -1 with equal probability.
  double rademacher() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  Rng(std::uint64_t key, int) noexcept : key_(key) {}
  void refill() noexcept;

  std::uint64_t key_ = 0;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

namespace detail {
/// One Philox4x32 block with 10 rounds (Random123 reference parameters).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::uint32_t k0,
                                           std::uint32_t k1) noexcept;
}  // namespace detail

/// Round-trippable 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace bilinear
