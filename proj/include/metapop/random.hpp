#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace metapop {

/// SplitMix64 finaliser; used to decorrelate replicate seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for replicate `index` of a run seeded with `base`.
constexpr std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return base ^ splitmix64(index);
}

/// Seeded uniform stream. Uniforms are built from the top 53 bits of a
/// 64-bit Mersenne twister so the sequence is identical on every platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Exponential with the given rate (rate > 0).
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

  /// Uniform index in [0, count).
  std::size_t index(std::size_t count) noexcept {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(count));
    return k < count ? k : count - 1;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metapop
