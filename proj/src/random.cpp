#include "rmtshrink/random.hpp"

#include <cmath>

#include "rmtshrink/errors.hpp"

namespace rmtshrink {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
    : base_(splitmix64_mix(key + kGolden) ^ splitmix64_mix(stream * kStreamSalt + kGolden)) {}

CounterRng::result_type CounterRng::operator()() noexcept {
  ++counter_;
  return splitmix64_mix(base_ + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64_mix(splitmix64_mix(seed + kGolden) ^ (index * kStreamSalt + 1));
}

NoiseDistribution parse_distribution(std::string_view name) {
  if (name == "gaussian" || name == "normal") return NoiseDistribution::gaussian;
  if (name == "rademacher") return NoiseDistribution::rademacher;
  if (name == "laplace") return NoiseDistribution::laplace;
  throw ValidationError("unsupported noise distribution '" + std::string(name) +
                        "' (expected gaussian, rademacher or laplace)");
}

std::string to_string(NoiseDistribution d) {
  switch (d) {
    case NoiseDistribution::gaussian: return "gaussian";
    case NoiseDistribution::rademacher: return "rademacher";
    case NoiseDistribution::laplace: return "laplace";
  }
  return "unknown";
}

EntrySampler::EntrySampler(NoiseDistribution dist, CounterRng rng)
    : dist_(dist), rng_(rng), exponential_(std::sqrt(2.0)) {}

double EntrySampler::operator()() {
  switch (dist_) {
    case NoiseDistribution::gaussian:
      return normal_(rng_);
    case NoiseDistribution::rademacher:
      return (rng_() >> 63) != 0 ? 1.0 : -1.0;
    case NoiseDistribution::laplace: {
      // sign * Exp(rate sqrt 2) has variance 2 / rate^2 = 1
      const double sign = (rng_() >> 63) != 0 ? 1.0 : -1.0;
      return sign * exponential_(rng_);
    }
  }
  return 0.0;
}

}  // namespace rmtshrink
