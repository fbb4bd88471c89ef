#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mbevo {

// SplitMix64 finalizer; used for key mixing and for seeding stream state.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Purpose : std::uint64_t {
  SeedGenome = 1,
  InitialMutation = 2,
  Evaluation = 3,
  Selection = 4,
  Mutation = 5,
  Probe = 6,
  PopulationSeed = 7,
};

// Identifies one random stream by a path of integers hashed together. Streams
// are derived, never advanced, so evaluation order cannot perturb results.
class StreamKey {
public:
  constexpr StreamKey() = default;
  constexpr explicit StreamKey(std::uint64_t seed) : key_(mix64(seed)) {}

  [[nodiscard]] constexpr StreamKey with(std::uint64_t component) const noexcept {
    StreamKey k;
    k.key_ = mix64(key_ ^ mix64(component + 0x632be59bd9b4e019ULL));
    return k;
  }
  [[nodiscard]] constexpr StreamKey with(Purpose p) const noexcept {
    return with(static_cast<std::uint64_t>(p));
  }

  [[nodiscard]] constexpr std::uint64_t value() const noexcept { return key_; }

  friend constexpr bool operator==(StreamKey, StreamKey) = default;

private:
  std::uint64_t key_ = 0;
};

// xoshiro256** seeded from a StreamKey. Satisfies UniformRandomBitGenerator,
// but the helpers below are used instead of <random> distributions so that
// streams are bit-identical across standard library implementations.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit Rng(StreamKey key) noexcept {
    std::uint64_t x = key.value();
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      s = mix64(x);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Number of failures before the next success of a Bernoulli(p) process.
  // Returns max() when p == 0.
  std::uint64_t geometric_gap(double p) noexcept {
    if (p <= 0.0) return std::numeric_limits<std::uint64_t>::max();
    if (p >= 1.0) return 0;
    const double u = 1.0 - uniform();  // (0, 1]
    const double g = std::floor(std::log(u) / std::log1p(-p));
    if (g >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace mbevo
