#pragma once

#include <cstdint>
#include <vector>

#include "rmtshrink/functions.hpp"
#include "rmtshrink/rmt_core.hpp"
#include "rmtshrink/stieltjes.hpp"

namespace rmtshrink {

struct ShrinkageResult {
  Vector d;  // ordered like the descending eigenvalues of the observed matrix
  int K = 0;
  FunctionId h_id = FunctionId::custom;
  double sigma_used = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// d_i = w_hat_i^T h(A) w_hat_i for the eigenvectors of the observed matrix.
Vector oracle_d(const SpectralDecomposition& a, const SpectralDecomposition& a_hat,
                const SpectralFunction& h);

/// Monte Carlo nonlinear shrinkage. For each replicate k, eigendecompose
/// diag(lambda_t) + sigma_t n^{-1/2} GOE(n) with seed derive_seed(seed, k),
/// take d_hat_{i,k} = g_{i,k}^T diag(h(lambda_t)) g_{i,k}, and average over k.
ShrinkageResult mc_shrink(double sigma_t, const DiscreteSpectrum& lambda_t,
                          const SpectralFunction& h, int K, std::uint64_t seed);

/// W_hat diag(d) W_hat^T
Matrix reconstruct(const SpectralDecomposition& a_hat, const Vector& d);

/// h(A) for a symmetric A given by its decomposition.
Matrix apply_function(const SpectralDecomposition& a, const SpectralFunction& h);

/// Losses normalized by n. Arguments are (true, estimate) except for the
/// Frobenius loss, which is symmetric.
double frobenius_loss(const Matrix& m_est, const Matrix& m_true);
double stein_loss(const Matrix& m_true, const Matrix& m_est);
double divergence_loss(const Matrix& m_true, const Matrix& m_est);
/// |M_true^{-1} M_est - I|_F^2 / n
double rel_frob_loss(const Matrix& m_true, const Matrix& m_est);

/// (1/n) sum_{i=[na]}^{[nb]} d_i with 1-based inclusive floor indices.
double window_average(const Vector& d, double a, double b);

/// Replaces every value below `floor` by `floor`.
DiscreteSpectrum clip_below(const DiscreteSpectrum& s, double floor);

enum class LinsysMode { rhs_isotropic, solution_isotropic };

LinsysMode parse_linsys_mode(const std::string& name);

/// Shrinker values f(lambda_hat_i) for the linear-system modes: f*_{1/t} when
/// b is isotropic, f*_t / f*_{t^2} when the solution is. Eigenvalues outside
/// the numerical support are evaluated at the nearest in-support point.
Vector linsys_shrinker_values(const DiscreteSpectrum& lambda_hat, LinsysMode mode,
                              const DiscreteSpectrum& h, double sigma,
                              const StieltjesOptions& options = {});

/// x = W_hat diag(f(lambda_hat)) W_hat^T b. sigma = 0 gives A^{-1} b.
Vector solve_noisy_linsys(const SpectralDecomposition& a_hat, const Vector& b, LinsysMode mode,
                          const DiscreteSpectrum& h, double sigma,
                          const StieltjesOptions& options = {});

}  // namespace rmtshrink
