#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmtshrink/rmt_core.hpp"

namespace rmtshrink {

struct RecoveryConfig {
  int max_iterations = 500;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  /// Stop once |grad|_2 <= grad_tol_per_n * n.
  double grad_tol_per_n = 1e-8;
  /// Dense BFGS up to this dimension, L-BFGS above.
  int lbfgs_above = 500;
  int lbfgs_memory = 10;
  /// Number of independent noise copies; >1 averages the per-copy solutions.
  int K_reg = 1;
  /// Stop when the objective changes by less than this (relative) for
  /// `stall_window` consecutive iterations.
  double stall_rel = 1e-13;
  int stall_window = 10;
};

struct RestartDiagnostics {
  std::uint64_t seed = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool gradient_converged = false;
  int degenerate_warnings = 0;
};

struct RecoveryResult {
  DiscreteSpectrum t_star{std::vector<double>{0.0}};
  double objective = 0.0;
  std::vector<RestartDiagnostics> restarts;
  int iterations = 0;
  double sigma_used = 0.0;
  int degenerate_warnings = 0;
  /// Seeds of the sampled noise copies (one per K_reg copy).
  std::vector<std::uint64_t> zhat_seeds;
  /// Per copy, the diagonal slot each entry of t_star occupied during the
  /// optimization (see aligned_noise).
  std::vector<std::vector<std::size_t>> zhat_orders;
};

/// The noise copy re-indexed so that recovery_objective(t_star, Zhat, .)
/// reproduces the optimized value. The optimizer keeps T in fixed diagonal
/// slots (smooth objective) and sorts only the result; conjugating Zhat by
/// the sorting permutation leaves the eigenvalues unchanged and is again a
/// sigma GOE(n) sample.
Matrix aligned_noise(const RecoveryResult& result, std::size_t copy = 0);

/// (1/n) sum_j (t_hat_j - lambda_hat_j)^2 where t_hat are the descending
/// eigenvalues of diag(sort(T)) + n^{-1/2} Zhat. T is sorted internally.
double recovery_objective(const Vector& t, const Matrix& zhat, const DiscreteSpectrum& lambda_hat);

struct RecoveryGradient {
  double objective = 0.0;
  Vector gradient;  // in the caller's ordering of T
  bool degenerate = false;
};

/// g_i = (2/n) sum_j (t_hat_j - lambda_hat_j) x_ij^2, using the Hadamard
/// first variation d t_hat_j / d t_i = x_ij^2.
RecoveryGradient recovery_gradient(const Vector& t, const Matrix& zhat,
                                   const DiscreteSpectrum& lambda_hat);

/// Deconvolves the spectrum: samples Zhat ~ sigma GOE(n) and minimizes the
/// recovery objective by quasi-Newton from `restarts` Gaussian starts
/// centered at mean(lambda_hat) with sd std(lambda_hat); keeps the best.
RecoveryResult recover_spectrum(const DiscreteSpectrum& lambda_hat, double sigma, int restarts,
                                std::uint64_t seed, const RecoveryConfig& config = {});

/// Default scree threshold as a fraction of Var(lambda_hat).
inline constexpr double kDefaultThresholdFrac = 1e-5;

struct NoiseSweep {
  std::vector<double> grid;        // sigma_hat^2, ascending
  std::vector<double> objectives;  // R_n(sigma_hat)
  double chosen_sigma2 = 0.0;
  double threshold = 0.0;
  std::vector<std::string> warnings;
};

/// Scree sweep: R_n on every grid point (noise resampled per point with a
/// derived seed); picks the midpoint between the largest grid value with
/// R_n <= threshold_frac * Var(lambda_hat) and the next grid value.
NoiseSweep estimate_noise(const DiscreteSpectrum& lambda_hat, const std::vector<double>& grid,
                          int restarts, std::uint64_t seed, double threshold_frac,
                          const RecoveryConfig& config = {});

/// Mean squared error between two equally long spectra (both descending).
double spectrum_mse(const DiscreteSpectrum& a, const DiscreteSpectrum& b);

}  // namespace rmtshrink
