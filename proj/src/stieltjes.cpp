#include "rmtshrink/stieltjes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/kernels.hpp"

namespace rmtshrink {

namespace {

struct FixedPointEval {
  Complex image;       // F(m) = sum w / (lambda - z - s2 m)
  Complex derivative;  // F'(m) = s2 sum w / (lambda - z - s2 m)^2
  double rounding;     // attainable accuracy of m - F(m) in double precision
};

// Weights materialized once per solve; H may have hundreds of atoms.
struct Atoms {
  const std::vector<double>& values;
  std::vector<double> weights;

  explicit Atoms(const DiscreteSpectrum& h) : values(h.values()), weights(h.weights()) {}

  FixedPointEval eval(double s2, Complex z, Complex m) const {
    const Complex zeta = z + s2 * m;
    Complex f = 0.0;
    Complex f2 = 0.0;
    double err = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const Complex r = 1.0 / (values[k] - zeta);
      const Complex wr = weights[k] * r;
      f += wr;
      f2 += wr * r;
      err += weights[k] * (std::abs(values[k]) + std::abs(zeta)) * std::norm(r);
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    return {f, s2 * f2, 16.0 * eps * (err + std::abs(m))};
  }
};

double scaled_tol(double tol, Complex m) { return tol * std::max(1.0, std::abs(m)); }

// Newton on G(m) = m - F(m) with residual-decrease backtracking; falls back
// to damped Picard steps when Newton cannot reduce the residual. With
// `upper` set, iterates are kept in the open upper half-plane.
struct IterationOutcome {
  Complex m;
  double residual;
  bool converged;
  int iterations;
};

double target(double tol, Complex m, const FixedPointEval& e) {
  return std::max(scaled_tol(tol, m), e.rounding);
}

IterationOutcome iterate(const Atoms& atoms, double s2, Complex z, Complex m,
                         const StieltjesOptions& opt, bool upper, bool allow_picard,
                         int max_iterations) {
  FixedPointEval e = atoms.eval(s2, z, m);
  double res = std::abs(m - e.image);
  // Newton must beat the best residual seen so far; otherwise Newton and
  // Picard steps can undo each other indefinitely.
  double best = res;
  int newton_failures = 0;
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (res <= target(opt.tolerance, m, e)) return {m, res, true, it};

    bool accepted = false;
    const Complex gp = 1.0 - e.derivative;
    const bool try_newton = newton_failures < 3 || it % 16 == 0;
    if (try_newton && std::abs(gp) > 0.0) {
      const Complex step = (m - e.image) / gp;
      double lambda = 1.0;
      for (int tries = 0; tries < 40; ++tries, lambda *= 0.5) {
        const Complex cand = m - lambda * step;
        if (upper && !(cand.imag() > 0.0)) continue;
        const FixedPointEval ce = atoms.eval(s2, z, cand);
        const double cres = std::abs(cand - ce.image);
        if (cres < best) {
          m = cand;
          e = ce;
          res = best = cres;
          accepted = true;
          break;
        }
      }
      newton_failures = accepted ? 0 : newton_failures + 1;
    }
    if (accepted) continue;
    if (!allow_picard) break;

    // F maps the upper half-plane into itself and contracts there, so a full
    // step always makes progress even when the residual briefly grows.
    m = e.image;
    e = atoms.eval(s2, z, m);
    res = std::abs(m - e.image);
    best = std::min(best, res);
  }
  return {m, res, res <= target(opt.tolerance, m, e), it};
}

std::string describe(Complex z) {
  std::ostringstream os;
  os.precision(6);
  os << z.real() << (z.imag() < 0 ? "" : "+") << z.imag() << "i";
  return os.str();
}

Complex solve_checked(const DiscreteSpectrum& h, double sigma, Complex z, Complex initial,
                      const StieltjesOptions& opt) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("solve_m: Im z must be > 0, got z=" + describe(z));
  }
  if (!(sigma >= 0.0)) throw ValidationError("solve_m: sigma must be >= 0");
  if (sigma == 0.0) return h.stieltjes(z);
  const Atoms atoms(h);
  const IterationOutcome out =
      iterate(atoms, sigma * sigma, z, initial, opt, true, true, opt.max_iterations);
  if (!out.converged || !(out.m.imag() > 0.0)) {
    std::ostringstream os;
    os << "solve_m: no convergence at z=" << describe(z) << " after " << out.iterations
       << " iterations, residual " << out.residual;
    throw NumericalError(os.str(), out.residual);
  }
  return out.m;
}

// Value at 0 of the polynomial through (eta_k, m_k).
Complex extrapolate_to_zero(const std::array<double, 4>& eta, std::array<Complex, 4> m) {
  for (std::size_t level = 1; level < 4; ++level) {
    for (std::size_t i = 0; i + level < 4; ++i) {
      const double xi = eta[i];
      const double xj = eta[i + level];
      m[i] = (-xj * m[i] + xi * m[i + 1]) / (xi - xj);
    }
  }
  return m[0];
}

bool has_atom_at_zero(const DiscreteSpectrum& h) {
  const double scale = std::max({1.0, std::abs(h.max()), std::abs(h.min())});
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (std::abs(h.value(k)) <= 1e-12 * scale && h.weight(k) > 0.0) return true;
  }
  return false;
}

void require_in_support(const BoundaryStieltjes& b, const StieltjesOptions& opt,
                        const char* who) {
  if (!in_support(b, opt)) {
    std::ostringstream os;
    os << who << ": x=" << b.x << " is outside the support (v=" << b.v << ")";
    throw OutOfSupport(os.str(), b.x);
  }
}

}  // namespace

Complex fixed_point_residual(const DiscreteSpectrum& h, double sigma, Complex z, Complex m) {
  const Atoms atoms(h);
  return m - atoms.eval(sigma * sigma, z, m).image;
}

Complex solve_m(const DiscreteSpectrum& h, double sigma, Complex z,
                const StieltjesOptions& options) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("solve_m: Im z must be > 0, got z=" + describe(z));
  }
  return solve_checked(h, sigma, z, -1.0 / z, options);
}

Complex solve_m_from(const DiscreteSpectrum& h, double sigma, Complex z, Complex initial,
                     const StieltjesOptions& options) {
  if (!(initial.imag() > 0.0)) initial = -1.0 / z;
  return solve_checked(h, sigma, z, initial, options);
}

BoundaryStieltjes boundary_uv(const DiscreteSpectrum& h, double sigma, double x,
                              const StieltjesOptions& opt) {
  if (!(sigma > 0.0)) throw ValidationError("boundary_uv: sigma must be > 0");
  if (!std::isfinite(x)) throw ValidationError("boundary_uv: x must be finite");
  if (opt.ladder_rungs < 4) throw ValidationError("boundary_uv: need at least 4 ladder rungs");

  const double diameter = h.max() - h.min();
  const double eta0 = opt.ladder_scale * std::min(diameter + 2.0 * sigma, 4.0 * sigma);
  const auto rungs = static_cast<std::size_t>(opt.ladder_rungs);

  std::vector<Complex> ms(rungs);
  std::vector<double> etas(rungs);
  Complex m = -1.0 / Complex(x, eta0);
  for (std::size_t k = 0; k < rungs; ++k) {
    etas[k] = std::ldexp(eta0, -static_cast<int>(k));
    m = solve_m_from(h, sigma, Complex(x, etas[k]), m, opt);
    ms[k] = m;
  }

  // The last three rung differences must shrink, unless they are already at
  // the solver's resolution.
  const Atoms atoms(h);
  const FixedPointEval last = atoms.eval(sigma * sigma, Complex(x, etas.back()), ms.back());
  const double resolution = 1e3 * target(opt.tolerance, ms.back(), last);
  std::array<double, 3> diffs{};
  for (std::size_t j = 0; j < 3; ++j) {
    diffs[j] = std::abs(ms[rungs - 3 + j] - ms[rungs - 4 + j]);
  }
  for (std::size_t j = 1; j < 3; ++j) {
    if (diffs[j] > diffs[j - 1] && diffs[j] > resolution) {
      std::ostringstream os;
      os << "boundary_uv: eta ladder not converging at x=" << x << " (rung differences "
         << diffs[0] << ", " << diffs[1] << ", " << diffs[2] << ")";
      throw NumericalError(os.str(), diffs[2]);
    }
  }

  std::array<double, 4> eta4{};
  std::array<Complex, 4> m4{};
  for (std::size_t j = 0; j < 4; ++j) {
    eta4[j] = etas[rungs - 4 + j];
    m4[j] = ms[rungs - 4 + j];
  }
  Complex m0 = extrapolate_to_zero(eta4, m4);

  // Newton polish directly on the real axis. Only kept when it lands near
  // the extrapolated value on the physical (Im >= 0) side.
  const IterationOutcome polished =
      iterate(atoms, sigma * sigma, Complex(x, 0.0), m0, opt, false, false, 60);
  const double correction = std::abs(m0 - ms.back());
  if (polished.converged &&
      std::abs(polished.m - m0) <= 10.0 * correction + resolution &&
      polished.m.imag() >= -resolution) {
    m0 = polished.m;
  }

  return {x, m0.real(), std::max(0.0, m0.imag())};
}

bool in_support(const BoundaryStieltjes& b, const StieltjesOptions& options) {
  return b.v > options.v_floor;
}

FunctionalBoundary boundary_uv_h(const DiscreteSpectrum& h, double sigma,
                                 const BoundaryStieltjes& b, const SpectralFunction& fn) {
  if (fn.id == FunctionId::one) return {b.x, b.u, b.v, fn.id};
  const Complex zeta = b.x + sigma * sigma * b.m();
  Complex s = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double hv = fn(h.value(k));
    if (!std::isfinite(hv)) {
      throw ValidationError("boundary_uv_h: h(" + std::to_string(h.value(k)) +
                            ") is not finite");
    }
    s += h.weight(k) * hv / (h.value(k) - zeta);
  }
  return {b.x, s.real(), s.imag(), fn.id};
}

FunctionalBoundary boundary_uv_h(const DiscreteSpectrum& h, double sigma, double x,
                                 const SpectralFunction& fn, const StieltjesOptions& options) {
  return boundary_uv_h(h, sigma, boundary_uv(h, sigma, x, options), fn);
}

double shrinker_general(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b,
                        const SpectralFunction& fn, const StieltjesOptions& options) {
  require_in_support(b, options, "shrinker_general");
  if (fn.id == FunctionId::one) return 1.0;
  return boundary_uv_h(h, sigma, b, fn).v_h / b.v;
}

double shrinker_general(const DiscreteSpectrum& h, double sigma, double x,
                        const SpectralFunction& fn, const StieltjesOptions& options) {
  return shrinker_general(h, sigma, boundary_uv(h, sigma, x, options), fn, options);
}

double shrinker_identity(double sigma, const BoundaryStieltjes& b) {
  return b.x + 2.0 * sigma * sigma * b.u;
}

double shrinker_inverse(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b) {
  if (has_atom_at_zero(h)) {
    throw ValidationError(
        "shrinker_inverse: H has an atom at 0, use shrinker_pseudoinverse instead");
  }
  const double s2 = sigma * sigma;
  const double mh0 = h.stieltjes(0.0).real();
  const double a = b.x + s2 * b.u;
  return (b.x + s2 * mh0) / (a * a + s2 * s2 * b.v * b.v);
}

double shrinker_square(double sigma, const BoundaryStieltjes& b) {
  const double s2 = sigma * sigma;
  const double a = b.x + s2 * b.u;
  return s2 + a * a - s2 * s2 * b.v * b.v + 2.0 * s2 * b.u * a;
}

double shrinker_identity(const DiscreteSpectrum& h, double sigma, double x,
                         const StieltjesOptions& options) {
  return shrinker_identity(sigma, boundary_uv(h, sigma, x, options));
}

double shrinker_inverse(const DiscreteSpectrum& h, double sigma, double x,
                        const StieltjesOptions& options) {
  if (has_atom_at_zero(h)) {
    throw ValidationError(
        "shrinker_inverse: H has an atom at 0, use shrinker_pseudoinverse instead");
  }
  return shrinker_inverse(h, sigma, boundary_uv(h, sigma, x, options));
}

double shrinker_square(const DiscreteSpectrum& h, double sigma, double x,
                       const StieltjesOptions& options) {
  return shrinker_square(sigma, boundary_uv(h, sigma, x, options));
}

double shrinker_reg_pseudoinverse(const DiscreteSpectrum& h, double sigma,
                                  const BoundaryStieltjes& b, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("shrinker_reg_pseudoinverse: lambda must be > 0");
  require_in_support(b, {}, "shrinker_reg_pseudoinverse");
  const Complex i_lambda(0.0, lambda);
  const Complex m = b.m();
  const Complex zeta = b.x + sigma * sigma * m;
  const Complex value = m * zeta / (zeta * zeta + lambda * lambda) +
                        h.stieltjes(i_lambda) / (2.0 * (i_lambda - zeta)) -
                        h.stieltjes(-i_lambda) / (2.0 * (i_lambda + zeta));
  return value.imag() / b.v;
}

double shrinker_reg_pseudoinverse(const DiscreteSpectrum& h, double sigma, double x,
                                  double lambda, const StieltjesOptions& options) {
  const BoundaryStieltjes b = boundary_uv(h, sigma, x, options);
  require_in_support(b, options, "shrinker_reg_pseudoinverse");
  return shrinker_reg_pseudoinverse(h, sigma, b, lambda);
}

void AtomAtZero::validate() const {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("AtomAtZero: p must lie in (0, 1), got " + std::to_string(p));
  }
  if (!(delta > 0.0)) throw ValidationError("AtomAtZero: delta must be > 0");
  if (nu.min() < delta) {
    throw ValidationError("AtomAtZero: nu has an atom at " + std::to_string(nu.min()) +
                          " below delta=" + std::to_string(delta));
  }
}

DiscreteSpectrum AtomAtZero::measure() const {
  validate();
  std::vector<double> values{0.0};
  std::vector<double> weights{p};
  for (std::size_t k = 0; k < nu.size(); ++k) {
    values.push_back(nu.value(k));
    weights.push_back((1.0 - p) * nu.weight(k));
  }
  // Renormalize against rounding in (1 - p) * w.
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return DiscreteSpectrum(std::move(values), std::move(weights));
}

double shrinker_pseudoinverse(const AtomAtZero& h, double sigma, const BoundaryStieltjes& b) {
  h.validate();
  require_in_support(b, {}, "shrinker_pseudoinverse");
  const Complex m = b.m();
  const Complex zeta = b.x + sigma * sigma * m;
  const double m_nu0 = h.nu.stieltjes(0.0).real();
  const Complex value = m / zeta + h.p / (zeta * zeta) - (1.0 - h.p) * m_nu0 / zeta;
  return value.imag() / b.v;
}

double shrinker_pseudoinverse(const AtomAtZero& h, double sigma, double x,
                              const StieltjesOptions& options) {
  const BoundaryStieltjes b = boundary_uv(h.measure(), sigma, x, options);
  require_in_support(b, options, "shrinker_pseudoinverse");
  return shrinker_pseudoinverse(h, sigma, b);
}

LossKind parse_loss(const std::string& name) {
  if (name == "stein_A_f") return LossKind::stein_A_f;
  if (name == "stein_f_A") return LossKind::stein_f_A;
  if (name == "divergence") return LossKind::divergence;
  if (name == "rel_frob_A_f") return LossKind::rel_frob_A_f;
  if (name == "rel_frob_f_A") return LossKind::rel_frob_f_A;
  throw ValidationError("unknown loss '" + name + "'");
}

std::string to_string(LossKind loss) {
  switch (loss) {
    case LossKind::stein_A_f: return "stein_A_f";
    case LossKind::stein_f_A: return "stein_f_A";
    case LossKind::divergence: return "divergence";
    case LossKind::rel_frob_A_f: return "rel_frob_A_f";
    case LossKind::rel_frob_f_A: return "rel_frob_f_A";
  }
  return "unknown";
}

double loss_shrinker(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b,
                     LossKind loss) {
  if (!(h.min() > 0.0)) {
    throw ValidationError("loss_shrinker: H must be supported on (0, inf)");
  }
  require_in_support(b, {}, "loss_shrinker");
  switch (loss) {
    case LossKind::stein_A_f:
      return 1.0 / shrinker_inverse(h, sigma, b);
    case LossKind::stein_f_A:
      return shrinker_identity(sigma, b);
    case LossKind::divergence:
      return std::sqrt(shrinker_identity(sigma, b) / shrinker_inverse(h, sigma, b));
    case LossKind::rel_frob_A_f:
      return shrinker_inverse(h, sigma, b) /
             shrinker_general(h, sigma, b, SpectralFunction::inverse_square());
    case LossKind::rel_frob_f_A:
      return shrinker_square(sigma, b) / shrinker_identity(sigma, b);
  }
  return 0.0;
}

double loss_shrinker(const DiscreteSpectrum& h, double sigma, double x, LossKind loss,
                     const StieltjesOptions& options) {
  const BoundaryStieltjes b = boundary_uv(h, sigma, x, options);
  require_in_support(b, options, "loss_shrinker");
  return loss_shrinker(h, sigma, b, loss);
}

double small_noise_mse(const DiscreteSpectrum& h, const std::function<double(double)>& fn,
                       const std::function<double(double)>& fn_prime) {
  const std::vector<double> w = h.weights();
  return kernels::parallel::divided_difference_energy(h.values(), w, fn, fn_prime);
}

}  // namespace rmtshrink
