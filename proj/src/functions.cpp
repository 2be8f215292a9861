#include "rmtshrink/functions.hpp"

#include <cmath>
#include <sstream>

#include "rmtshrink/errors.hpp"

namespace rmtshrink {

std::string to_string(FunctionId id) {
  switch (id) {
    case FunctionId::one: return "one";
    case FunctionId::identity: return "t";
    case FunctionId::inverse: return "inv";
    case FunctionId::square: return "square";
    case FunctionId::sqrt: return "sqrt";
    case FunctionId::inverse_square: return "inv-square";
    case FunctionId::reg_pseudoinverse: return "reg-pinv";
    case FunctionId::pseudoinverse: return "pinv";
    case FunctionId::polynomial: return "poly";
    case FunctionId::custom: return "custom";
  }
  return "custom";
}

SpectralFunction SpectralFunction::one() {
  return {FunctionId::one, "one", [](double) { return 1.0; }};
}

SpectralFunction SpectralFunction::identity() {
  return {FunctionId::identity, "t", [](double t) { return t; }};
}

SpectralFunction SpectralFunction::inverse() {
  return {FunctionId::inverse, "inv", [](double t) { return 1.0 / t; }};
}

SpectralFunction SpectralFunction::square() {
  return {FunctionId::square, "square", [](double t) { return t * t; }};
}

SpectralFunction SpectralFunction::sqrt() {
  return {FunctionId::sqrt, "sqrt", [](double t) { return std::sqrt(t); }};
}

SpectralFunction SpectralFunction::inverse_square() {
  return {FunctionId::inverse_square, "inv-square", [](double t) { return 1.0 / (t * t); }};
}

SpectralFunction SpectralFunction::reg_pseudoinverse(double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("reg_pseudoinverse: lambda must be > 0");
  const double l2 = lambda * lambda;
  return {FunctionId::reg_pseudoinverse, "reg-pinv",
          [l2](double t) { return t / (t * t + l2); }};
}

SpectralFunction SpectralFunction::pseudoinverse(double zero_tol) {
  return {FunctionId::pseudoinverse, "pinv",
          [zero_tol](double t) { return std::abs(t) <= zero_tol ? 0.0 : 1.0 / t; }};
}

SpectralFunction SpectralFunction::polynomial(std::vector<double> coefficients) {
  if (coefficients.empty()) throw ValidationError("polynomial: needs at least one coefficient");
  std::ostringstream name;
  name << "poly(";
  for (std::size_t k = 0; k < coefficients.size(); ++k) name << (k ? "," : "") << coefficients[k];
  name << ")";
  return {FunctionId::polynomial, name.str(), [c = std::move(coefficients)](double t) {
            double acc = 0.0;
            for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
            return acc;
          }};
}

SpectralFunction SpectralFunction::custom(std::string name, std::function<double(double)> f) {
  return {FunctionId::custom, std::move(name), std::move(f)};
}

SpectralFunction SpectralFunction::from_name(const std::string& name) {
  if (name == "t" || name == "identity") return identity();
  if (name == "inv" || name == "inverse") return inverse();
  if (name == "sqrt") return sqrt();
  if (name == "square") return square();
  if (name == "one") return one();
  if (name == "inv-square") return inverse_square();
  if (name == "pinv") return pseudoinverse();
  throw ValidationError("unknown function '" + name + "'");
}

}  // namespace rmtshrink
