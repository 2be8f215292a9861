#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

namespace rmtshrink {

/// Counter-based generator: the k-th output of stream s under key K is
/// splitmix64_mix(base(K, s) + (k + 1) * golden_gamma). Any (key, stream)
/// pair is an independent, reproducible sequence, which is what lets matrix
/// rows and Monte Carlo replicates be sampled in parallel.
///
/// Identity: "rmtshrink-splitmix64-ctr v1". Changing the mixing constants is
/// a version bump.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::string_view kName = "rmtshrink-splitmix64-ctr v1";

  explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

/// Derived seed for sub-task `index` (replicate, restart, grid point).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Entry distributions for Wigner noise, all with mean 0 and variance 1.
enum class NoiseDistribution { gaussian, rademacher, laplace };

NoiseDistribution parse_distribution(std::string_view name);
std::string to_string(NoiseDistribution d);

/// Unit-variance draws from one distribution on one stream. Laplace uses
/// scale 1/sqrt(2); Rademacher is +-1 with equal probability.
class EntrySampler {
 public:
  EntrySampler(NoiseDistribution dist, CounterRng rng);

  double operator()();

 private:
  NoiseDistribution dist_;
  CounterRng rng_;
  std::normal_distribution<double> normal_;
  std::exponential_distribution<double> exponential_;
};

}  // namespace rmtshrink
