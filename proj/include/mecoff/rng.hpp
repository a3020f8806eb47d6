#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace mecoff {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based generator: the n-th output is a pure function of
/// (key, n), so independent streams are obtained by deriving keys from
/// (seed, stream id). Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return detail::splitmix64(key_ + detail::splitmix64(counter_++)); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's nearly-divisionless method, rejection keeps it unbiased.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Poisson draw by CDF inversion; fine for the small means used here.
  int poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double pmf = std::exp(-mean);
    double cdf = pmf;
    int k = 0;
    while (u >= cdf && k < 1000) {
      ++k;
      pmf *= mean / k;
      cdf += pmf;
      if (pmf == 0.0 && cdf < u) break;
    }
    return k;
  }

  /// Index drawn from a discrete distribution given by `weights`
  /// (assumed to sum to 1).
  std::size_t categorical(std::span<const double> weights) noexcept {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    // Rounding left a sliver above the last cumulative value.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return 0;
  }

  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mecoff
