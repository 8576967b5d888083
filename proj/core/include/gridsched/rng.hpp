// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace gridsched {

/// Counter-based generator: the i-th output of a stream is a pure function of
/// (key, i), using the SplitMix64 finalizer as the bijective mixer. Streams
/// with distinct keys are independent for simulation purposes, and reordering
/// draws on one stream never perturbs another.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  /// Key for a (seed, replication, role) triple.
  static constexpr CounterRng stream(std::uint64_t seed, std::uint64_t replication,
                                     std::uint64_t role) noexcept {
    return CounterRng(mix(mix(mix(seed) ^ (replication + 0x632be59bd9b4e019ULL)) ^
                          (role * 0x9e3779b97f4a7c15ULL + 0x8cb92ba72f3d8dd7ULL)));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exponential with the given rate; +inf when rate is zero.
  double exponential(double rate) noexcept {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(uniform()) / rate;
  }

  std::uint64_t below(std::uint64_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    // Lemire's multiply-shift with rejection.
    u128 m = static_cast<u128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<u128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Deterministic Fisher-Yates shuffle (std::shuffle is not portable across
/// standard libraries).
template <class RandomIt>
void portable_shuffle(RandomIt first, RandomIt last, CounterRng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace gridsched
