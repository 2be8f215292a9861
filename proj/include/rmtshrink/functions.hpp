#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rmtshrink {

enum class FunctionId {
  one,
  identity,
  inverse,
  square,
  sqrt,
  inverse_square,
  reg_pseudoinverse,
  pseudoinverse,
  polynomial,
  custom,
};

std::string to_string(FunctionId id);

/// A scalar function h applied to eigenvalues, tagged so that closed forms
/// can be selected for the common cases.
struct SpectralFunction {
  FunctionId id = FunctionId::custom;
  std::string name;
  std::function<double(double)> eval;

  double operator()(double t) const { return eval(t); }

  static SpectralFunction one();
  static SpectralFunction identity();
  static SpectralFunction inverse();
  static SpectralFunction square();
  static SpectralFunction sqrt();
  static SpectralFunction inverse_square();
  /// t / (t^2 + lambda^2)
  static SpectralFunction reg_pseudoinverse(double lambda);
  /// 0 for |t| <= zero_tol, 1/t otherwise.
  static SpectralFunction pseudoinverse(double zero_tol = 1e-12);
  /// sum_k c_k t^k
  static SpectralFunction polynomial(std::vector<double> coefficients);
  static SpectralFunction custom(std::string name, std::function<double(double)> f);

  /// Looks up t, inv, sqrt, square, one, inv-square, pinv by CLI name.
  static SpectralFunction from_name(const std::string& name);
};

}  // namespace rmtshrink
