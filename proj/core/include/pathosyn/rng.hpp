#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace pathosyn {

/// Splittable key for counter-style randomness. Every random draw in the
/// library comes from a stream keyed by a path such as
/// (seed, subject, step), so results do not depend on batching or
/// evaluation order.
class RngKey {
 public:
  constexpr RngKey() = default;
  constexpr explicit RngKey(std::uint64_t seed) : state_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  [[nodiscard]] constexpr RngKey fold(std::uint64_t v) const {
    RngKey k;
    k.state_ = mix(state_ ^ mix(v + 0x9e3779b97f4a7c15ULL));
    return k;
  }
  [[nodiscard]] RngKey fold(std::string_view label) const;

  [[nodiscard]] constexpr std::uint64_t value() const noexcept { return state_; }
  friend constexpr bool operator==(RngKey, RngKey) = default;

  /// SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_ = 0;
};

/// Sequential generator seeded from one key.
class RngStream {
 public:
  explicit RngStream(RngKey key) : engine_(key.value()) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

  template <std::floating_point T>
  void fill_normal(std::span<T> out) {
    for (T& v : out) v = static_cast<T>(normal());
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace pathosyn
