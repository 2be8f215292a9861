#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "rmtshrink/random.hpp"
#include "rmtshrink/spectrum.hpp"

namespace rmtshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues (descending) and the matching orthonormal eigenvectors, column
/// j paired with eigenvalue j.
struct SpectralDecomposition {
  DiscreteSpectrum eigenvalues;
  Matrix eigenvectors;

  Eigen::Index dim() const { return eigenvectors.rows(); }
  Vector values() const;
};

/// GOE(n): off-diagonal N(0,1), diagonal N(0,2), symmetric. The n^{-1/2}
/// scaling is left to callers. Row i draws entries (i, i..n-1) from stream i,
/// so the matrix depends only on (n, seed).
Matrix sample_goe(Eigen::Index n, std::uint64_t seed);

/// Wigner matrix with every upper-half entry (diagonal included) drawn iid
/// from `dist`.
Matrix sample_wigner(Eigen::Index n, NoiseDistribution dist, std::uint64_t seed);

/// Noise kinds for the observation model: GOE, or iid Wigner entries.
struct NoiseKind {
  bool goe = true;
  NoiseDistribution iid = NoiseDistribution::gaussian;

  static NoiseKind gaussian_orthogonal() { return {}; }
  static NoiseKind wigner(NoiseDistribution d) { return {false, d}; }
};

Matrix sample_noise(Eigen::Index n, const NoiseKind& kind, std::uint64_t seed);

/// A = diag(spectrum_A) (or a full symmetric matrix) observed as
/// A + sigma n^{-1/2} Z.
struct NoisyModel {
  DiscreteSpectrum spectrum_A;
  double sigma = 0.0;
  NoiseKind noise;
  std::uint64_t seed = 0;
  std::optional<Matrix> full_A;

  Matrix population() const;
  Matrix noise_matrix() const;
  Matrix observe() const;
};

/// Dense symmetric eigensolver in use. LAPACK (dsyevd) is chosen when a
/// one-time accuracy probe passes, otherwise Eigen's solver. The
/// RMTSHRINK_EIGEN_BACKEND environment variable (lapack | eigen) overrides.
enum class EigenBackend { lapack, eigen };
EigenBackend eigen_backend();
std::string to_string(EigenBackend b);

/// Symmetric eigendecomposition, eigenvalues descending. Rejects inputs that
/// are asymmetric beyond 1e-10 * max(1, max|M|) or contain non-finite values.
SpectralDecomposition eigh(const Matrix& m);

/// Same, skipping the symmetry/finiteness scan. The caller guarantees both.
SpectralDecomposition eigh_trusted(const Matrix& m);

/// Eigenvalues only, descending.
Vector eigvalsh_trusted(const Matrix& m);

/// max_i |lambda_hat_i - lambda_i| <= sigma * z_opnorm.
bool weyl_bound_check(const DiscreteSpectrum& spec_A, const DiscreteSpectrum& spec_Ahat,
                      double sigma, double z_opnorm);

/// Semicircle CDF with variance sigma^2 (support [-2 sigma, 2 sigma]).
double semicircle_cdf(double x, double sigma = 1.0);

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `eigenvalues` and the semicircle law with variance sigma^2.
double ks_distance_semicircle(const Vector& eigenvalues, double sigma = 1.0);

/// Throws ValidationError naming the first pair (i, j) with
/// |M_ij - M_ji| > tol * max(1, max|M|), or the first non-finite entry.
void require_symmetric(const Matrix& m, double rel_tol = 1e-10);

}  // namespace rmtshrink
