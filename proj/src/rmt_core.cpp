#include "rmtshrink/rmt_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <vector>

#include <lapacke.h>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/kernels.hpp"

namespace rmtshrink {

Vector SpectralDecomposition::values() const {
  const auto& v = eigenvalues.values();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

namespace {

void require_dimension(Eigen::Index n, const char* who) {
  if (n < 1) {
    throw ValidationError(std::string(who) + ": invalid dimension n=" + std::to_string(n));
  }
}

// dsyevd on a column-major copy; LAPACK returns ascending order, which we flip.
void lapack_syevd(Matrix& a, Vector& w, char jobz) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(a.rows());
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'L', n, a.data(), n, w.data());
  if (info != 0) {
    throw NumericalError("eigh: dsyevd failed with info=" + std::to_string(info));
  }
}

void eigen_syev(const Matrix& m, Matrix& vectors, Vector& w, bool want_vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      m, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigh: Eigen solver did not converge");
  w = es.eigenvalues();
  if (want_vectors) vectors = es.eigenvectors();
}

// Some BLAS builds ship broken kernels for newer CPUs; a wrong dgemm makes
// every blocked LAPACK routine silently return garbage. Check one
// decomposition large enough to take the blocked paths before trusting it.
EigenBackend probe_backend() {
  if (const char* forced = std::getenv("RMTSHRINK_EIGEN_BACKEND")) {
    const std::string f = forced;
    if (f == "eigen") return EigenBackend::eigen;
    if (f == "lapack") return EigenBackend::lapack;
  }
  const Eigen::Index n = 200;
  const Matrix m = sample_goe(n, 0x9E3779B97F4A7C15ULL);
  Matrix a = m;
  Vector w;
  lapack_syevd(a, w, 'V');
  const double scale = m.norm();
  const double recon = (a * w.asDiagonal() * a.transpose() - m).norm() / scale;
  const double orth = (a.transpose() * a - Matrix::Identity(n, n)).norm();
  Matrix b = m;
  Vector w_only;
  lapack_syevd(b, w_only, 'N');
  const double vals = (w - w_only).norm() / scale;
  const bool ok = recon < 1e-10 && orth < 1e-10 && vals < 1e-10;
  return ok ? EigenBackend::lapack : EigenBackend::eigen;
}

}  // namespace

EigenBackend eigen_backend() {
  static const EigenBackend backend = probe_backend();
  return backend;
}

std::string to_string(EigenBackend b) { return b == EigenBackend::lapack ? "lapack" : "eigen"; }

Matrix sample_goe(Eigen::Index n, std::uint64_t seed) {
  require_dimension(n, "sample_goe");
  return kernels::parallel::fill_wigner(n, NoiseDistribution::gaussian, std::sqrt(2.0), seed);
}

Matrix sample_wigner(Eigen::Index n, NoiseDistribution dist, std::uint64_t seed) {
  require_dimension(n, "sample_wigner");
  return kernels::parallel::fill_wigner(n, dist, 1.0, seed);
}

Matrix sample_noise(Eigen::Index n, const NoiseKind& kind, std::uint64_t seed) {
  return kind.goe ? sample_goe(n, seed) : sample_wigner(n, kind.iid, seed);
}

Matrix NoisyModel::population() const {
  if (full_A) return *full_A;
  const auto& v = spectrum_A.values();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).asDiagonal();
}

Matrix NoisyModel::noise_matrix() const {
  const auto n = full_A ? full_A->rows() : static_cast<Eigen::Index>(spectrum_A.size());
  return sample_noise(n, noise, seed);
}

Matrix NoisyModel::observe() const {
  if (sigma < 0.0) throw ValidationError("NoisyModel: sigma must be >= 0");
  Matrix a = population();
  if (sigma == 0.0) return a;
  const double scale = sigma / std::sqrt(static_cast<double>(a.rows()));
  a.noalias() += scale * noise_matrix();
  return a;
}

void require_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) {
    throw ValidationError("matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected square");
  }
  double scale = 1.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw ValidationError("non-finite entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
      scale = std::max(scale, std::abs(m(i, j)));
    }
  }
  const double tol = rel_tol * scale;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        throw ValidationError("matrix not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + "): " + std::to_string(m(i, j)) + " vs " +
                              std::to_string(m(j, i)));
      }
    }
  }
}

SpectralDecomposition eigh(const Matrix& m) {
  require_symmetric(m);
  return eigh_trusted(m);
}

SpectralDecomposition eigh_trusted(const Matrix& m) {
  require_dimension(m.rows(), "eigh");
  Matrix a;
  Vector w;
  if (eigen_backend() == EigenBackend::lapack) {
    a = m;
    lapack_syevd(a, w, 'V');
  } else {
    eigen_syev(m, a, w, true);
  }
  const Eigen::Index n = a.rows();
  std::vector<double> values(static_cast<std::size_t>(n));
  Matrix vectors(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    values[static_cast<std::size_t>(j)] = w(n - 1 - j);
    vectors.col(j) = a.col(n - 1 - j);
  }
  return {DiscreteSpectrum(std::move(values)), std::move(vectors)};
}

Vector eigvalsh_trusted(const Matrix& m) {
  require_dimension(m.rows(), "eigvalsh");
  Vector w;
  if (eigen_backend() == EigenBackend::lapack) {
    Matrix a = m;
    lapack_syevd(a, w, 'N');
  } else {
    Matrix unused;
    eigen_syev(m, unused, w, false);
  }
  return w.reverse();
}

bool weyl_bound_check(const DiscreteSpectrum& spec_A, const DiscreteSpectrum& spec_Ahat,
                      double sigma, double z_opnorm) {
  if (spec_A.size() != spec_Ahat.size()) {
    throw ValidationError("weyl_bound_check: spectra have lengths " +
                          std::to_string(spec_A.size()) + " and " +
                          std::to_string(spec_Ahat.size()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < spec_A.size(); ++i) {
    worst = std::max(worst, std::abs(spec_Ahat.value(i) - spec_A.value(i)));
  }
  return worst <= sigma * z_opnorm;
}

double semicircle_cdf(double x, double sigma) {
  const double y = x / sigma;
  if (y <= -2.0) return 0.0;
  if (y >= 2.0) return 1.0;
  return 0.5 + y * std::sqrt(4.0 - y * y) / (4.0 * std::numbers::pi) +
         std::asin(y / 2.0) / std::numbers::pi;
}

double ks_distance_semicircle(const Vector& eigenvalues, double sigma) {
  std::vector<double> sorted(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = semicircle_cdf(sorted[i], sigma);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace rmtshrink
