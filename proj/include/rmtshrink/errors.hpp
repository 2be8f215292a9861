#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace rmtshrink {

/// Bad input: wrong dimensions, out-of-domain arguments, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A shrinker was asked for a point where the limiting density vanishes.
class OutOfSupport : public ValidationError {
 public:
  OutOfSupport(const std::string& what, double x) : ValidationError(what), x_(x) {}

  double x() const noexcept { return x_; }

 private:
  double x_;
};

/// An iterative method failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          double last_residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace rmtshrink
