#pragma once

#include <complex>
#include <functional>

#include "rmtshrink/functions.hpp"
#include "rmtshrink/spectrum.hpp"

namespace rmtshrink {

using Complex = std::complex<double>;

struct StieltjesOptions {
  /// Fixed-point residual target, scaled by max(1, |m|).
  double tolerance = 1e-12;
  int max_iterations = 20000;
  /// eta_0 = ladder_scale * min(spectral diameter + 2 sigma, 4 sigma)
  double ladder_scale = 1e-2;
  int ladder_rungs = 12;
  /// Below this, v is treated as zero and x as outside the support.
  double v_floor = 1e-7;
};

/// Boundary value lim_{eta -> 0+} m(x + i eta) of the Stieltjes transform of
/// H boxplus semicircle(sigma^2). v / pi is the limiting density at x.
struct BoundaryStieltjes {
  double x = 0.0;
  double u = 0.0;
  double v = 0.0;

  Complex m() const { return {u, v}; }
};

/// lim_{eta -> 0+} sum_k w_k h(lambda_k) / (lambda_k - x - i eta - sigma^2 m).
struct FunctionalBoundary {
  double x = 0.0;
  double u_h = 0.0;
  double v_h = 0.0;
  FunctionId h_id = FunctionId::custom;
};

/// G(m) = m - sum_k w_k / (lambda_k - z - sigma^2 m)
Complex fixed_point_residual(const DiscreteSpectrum& h, double sigma, Complex z, Complex m);

/// Solves m = int dH(t) / (t - z - sigma^2 m) for Im z > 0; the solution is
/// the unique one with Im m > 0. Damped Picard iteration from m = -1/z with
/// the damping adapted to residual decrease, then safeguarded Newton.
Complex solve_m(const DiscreteSpectrum& h, double sigma, Complex z,
                const StieltjesOptions& options = {});

/// Same iteration warm-started from `initial` (used along the eta ladder).
Complex solve_m_from(const DiscreteSpectrum& h, double sigma, Complex z, Complex initial,
                     const StieltjesOptions& options = {});

/// Evaluates m on eta_k = eta_0 2^{-k}, checks that the last three rung
/// differences shrink, Richardson-extrapolates the last four rungs to eta = 0
/// and polishes the result with Newton at eta = 0 when that stays close.
BoundaryStieltjes boundary_uv(const DiscreteSpectrum& h, double sigma, double x,
                              const StieltjesOptions& options = {});

bool in_support(const BoundaryStieltjes& b, const StieltjesOptions& options = {});

FunctionalBoundary boundary_uv_h(const DiscreteSpectrum& h, double sigma,
                                 const BoundaryStieltjes& b, const SpectralFunction& fn);
FunctionalBoundary boundary_uv_h(const DiscreteSpectrum& h, double sigma, double x,
                                 const SpectralFunction& fn,
                                 const StieltjesOptions& options = {});

/// Optimal Frobenius shrinker v_h / v. Throws OutOfSupport outside the support.
double shrinker_general(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b,
                        const SpectralFunction& fn, const StieltjesOptions& options = {});
double shrinker_general(const DiscreteSpectrum& h, double sigma, double x,
                        const SpectralFunction& fn, const StieltjesOptions& options = {});

/// x + 2 sigma^2 u
double shrinker_identity(double sigma, const BoundaryStieltjes& b);
/// (x + sigma^2 m_H(0)) / ((x + sigma^2 u)^2 + sigma^4 v^2)
double shrinker_inverse(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b);
/// sigma^2 + (x + sigma^2 u)^2 - sigma^4 v^2 + 2 sigma^2 u (x + sigma^2 u)
double shrinker_square(double sigma, const BoundaryStieltjes& b);

double shrinker_identity(const DiscreteSpectrum& h, double sigma, double x,
                         const StieltjesOptions& options = {});
double shrinker_inverse(const DiscreteSpectrum& h, double sigma, double x,
                        const StieltjesOptions& options = {});
double shrinker_square(const DiscreteSpectrum& h, double sigma, double x,
                       const StieltjesOptions& options = {});

/// Shrinker for A (A^2 + lambda^2)^{-1} from the partial-fraction form in
/// m, m_H(i lambda) and m_H(-i lambda).
double shrinker_reg_pseudoinverse(const DiscreteSpectrum& h, double sigma,
                                  const BoundaryStieltjes& b, double lambda);
double shrinker_reg_pseudoinverse(const DiscreteSpectrum& h, double sigma, double x,
                                  double lambda, const StieltjesOptions& options = {});

/// H = p delta_0 + (1 - p) nu with supp(nu) in [delta, inf).
struct AtomAtZero {
  double p = 0.0;
  DiscreteSpectrum nu;
  double delta = 0.0;

  /// The combined measure used by boundary_uv.
  DiscreteSpectrum measure() const;
  void validate() const;
};

double shrinker_pseudoinverse(const AtomAtZero& h, double sigma, const BoundaryStieltjes& b);
double shrinker_pseudoinverse(const AtomAtZero& h, double sigma, double x,
                              const StieltjesOptions& options = {});

enum class LossKind { stein_A_f, stein_f_A, divergence, rel_frob_A_f, rel_frob_f_A };

LossKind parse_loss(const std::string& name);
std::string to_string(LossKind loss);

/// Optimal shrinkers for the alternative losses:
///   stein_A_f    1 / f*_{1/t}
///   stein_f_A    f*_t
///   divergence   sqrt(f*_t / f*_{1/t})
///   rel_frob_A_f f*_{1/t} / f*_{1/t^2}
///   rel_frob_f_A f*_{t^2} / f*_t
double loss_shrinker(const DiscreteSpectrum& h, double sigma, const BoundaryStieltjes& b,
                     LossKind loss);
double loss_shrinker(const DiscreteSpectrum& h, double sigma, double x, LossKind loss,
                     const StieltjesOptions& options = {});

/// sum_{k,l} w_k w_l ((h(l_k) - h(l_l)) / (l_k - l_l))^2 with h' on the
/// diagonal: the sigma -> 0 limit of |h(Ahat) - h(A)|_F^2 / (n sigma^2).
double small_noise_mse(const DiscreteSpectrum& h, const std::function<double(double)>& fn,
                       const std::function<double(double)>& fn_prime);

}  // namespace rmtshrink
