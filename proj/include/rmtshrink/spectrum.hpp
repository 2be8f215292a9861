#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

namespace rmtshrink {

/// A finite atomic probability measure, stored as eigenvalues sorted in
/// non-increasing order with optional weights. Without explicit weights every
/// atom carries mass 1/size(), which is the empirical spectral distribution of
/// a matrix.
class DiscreteSpectrum {
 public:
  /// Sorts `values` descending. Throws ValidationError on empty input or
  /// non-finite values.
  explicit DiscreteSpectrum(std::vector<double> values);

  /// Weighted atoms. Weights must be nonnegative and sum to 1 within 1e-12.
  DiscreteSpectrum(std::vector<double> values, std::vector<double> weights);

  /// Builds a weighted measure from (location, mass) pairs.
  static DiscreteSpectrum atoms(std::initializer_list<std::pair<double, double>> atoms);

  /// n values split as evenly as possible across `levels` (earlier levels get
  /// the remainder), e.g. n=500 over {1,4,9} gives 167/167/166 copies.
  static DiscreteSpectrum balanced(const std::vector<double>& levels, std::size_t n);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double value(std::size_t i) const { return values_[i]; }
  double weight(std::size_t i) const;
  std::vector<double> weights() const;
  bool uniform() const noexcept { return weights_.empty(); }

  double max() const noexcept { return values_.front(); }
  double min() const noexcept { return values_.back(); }
  double mean() const;
  double variance() const;

  /// m_H(z) = sum_k w_k / (lambda_k - z).
  std::complex<double> stieltjes(std::complex<double> z) const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;  // empty means uniform
};

}  // namespace rmtshrink
