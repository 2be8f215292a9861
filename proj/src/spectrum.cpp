#include "rmtshrink/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rmtshrink/errors.hpp"

namespace rmtshrink {

namespace {

void require_finite_nonempty(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("DiscreteSpectrum: needs at least one value");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("DiscreteSpectrum: non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace

DiscreteSpectrum::DiscreteSpectrum(std::vector<double> values) : values_(std::move(values)) {
  require_finite_nonempty(values_);
  std::sort(values_.begin(), values_.end(), std::greater<>());
}

DiscreteSpectrum::DiscreteSpectrum(std::vector<double> values, std::vector<double> weights) {
  require_finite_nonempty(values);
  if (weights.size() != values.size()) {
    throw ValidationError("DiscreteSpectrum: " + std::to_string(values.size()) + " values but " +
                          std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("DiscreteSpectrum: weights must be nonnegative and finite");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("DiscreteSpectrum: weights sum to " + std::to_string(total) +
                          ", expected 1");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  values_.reserve(order.size());
  weights_.reserve(order.size());
  for (std::size_t k : order) {
    values_.push_back(values[k]);
    weights_.push_back(weights[k]);
  }
}

DiscreteSpectrum DiscreteSpectrum::atoms(
    std::initializer_list<std::pair<double, double>> atoms) {
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& [x, w] : atoms) {
    values.push_back(x);
    weights.push_back(w);
  }
  return DiscreteSpectrum(std::move(values), std::move(weights));
}

DiscreteSpectrum DiscreteSpectrum::balanced(const std::vector<double>& levels, std::size_t n) {
  if (levels.empty() || n == 0) {
    throw ValidationError("DiscreteSpectrum::balanced: need levels and n >= 1");
  }
  std::vector<double> values;
  values.reserve(n);
  const std::size_t k = levels.size();
  for (std::size_t l = 0; l < k; ++l) {
    const std::size_t count = n / k + (l < n % k ? 1 : 0);
    values.insert(values.end(), count, levels[l]);
  }
  return DiscreteSpectrum(std::move(values));
}

double DiscreteSpectrum::weight(std::size_t i) const {
  return weights_.empty() ? 1.0 / static_cast<double>(values_.size()) : weights_[i];
}

std::vector<double> DiscreteSpectrum::weights() const {
  if (!weights_.empty()) return weights_;
  return std::vector<double>(values_.size(), 1.0 / static_cast<double>(values_.size()));
}

double DiscreteSpectrum::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += weight(i) * values_[i];
  return s;
}

double DiscreteSpectrum::variance() const {
  const double mu = mean();
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double d = values_[i] - mu;
    s += weight(i) * d * d;
  }
  return s;
}

std::complex<double> DiscreteSpectrum::stieltjes(std::complex<double> z) const {
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += weight(i) / (values_[i] - z);
  return s;
}

}  // namespace rmtshrink
