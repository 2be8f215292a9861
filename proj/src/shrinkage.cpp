#include "rmtshrink/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rmtshrink/detail/first_error.hpp"
#include "rmtshrink/errors.hpp"
#include "rmtshrink/kernels.hpp"
#include "rmtshrink/support.hpp"

namespace rmtshrink {

namespace {

std::vector<double> evaluate_finite(const SpectralFunction& h, const DiscreteSpectrum& s,
                                    const char* who) {
  std::vector<double> out(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    out[j] = h(s.value(j));
    if (!std::isfinite(out[j])) {
      std::ostringstream os;
      os.precision(17);
      os << who << ": h(" << s.value(j) << ") = " << out[j] << " is not finite (eigenvalue "
         << j << ")";
      throw ValidationError(os.str());
    }
  }
  return out;
}

void require_square_same(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw ValidationError(std::string(who) + ": matrices must be square and of equal size");
  }
}

Eigen::LLT<Matrix> require_pd(const Matrix& m, const char* who, const char* which) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw ValidationError(std::string(who) + ": " + which + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

Vector oracle_d(const SpectralDecomposition& a, const SpectralDecomposition& a_hat,
                const SpectralFunction& h) {
  if (a.dim() != a_hat.dim()) {
    throw ValidationError("oracle_d: dimensions " + std::to_string(a.dim()) + " and " +
                          std::to_string(a_hat.dim()) + " differ");
  }
  const std::vector<double> hv = evaluate_finite(h, a.eigenvalues, "oracle_d");
  const Matrix overlap = a.eigenvectors.transpose() * a_hat.eigenvectors;
  return kernels::parallel::overlap_diagonal(overlap, hv);
}

ShrinkageResult mc_shrink(double sigma_t, const DiscreteSpectrum& lambda_t,
                          const SpectralFunction& h, int K, std::uint64_t seed) {
  if (K < 1) throw ValidationError("mc_shrink: K must be >= 1, got " + std::to_string(K));
  if (!(sigma_t >= 0.0)) throw ValidationError("mc_shrink: sigma must be >= 0");
  const std::vector<double> hv = evaluate_finite(h, lambda_t, "mc_shrink");
  const auto n = static_cast<Eigen::Index>(lambda_t.size());

  ShrinkageResult result;
  result.K = K;
  result.h_id = h.id;
  result.sigma_used = sigma_t;
  for (int k = 0; k < K; ++k) {
    result.seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(k)));
  }

  if (sigma_t == 0.0) {
    result.d = Eigen::Map<const Vector>(hv.data(), n);
    return result;
  }

  const Vector diag = Eigen::Map<const Vector>(lambda_t.values().data(), n);
  const double scale = sigma_t / std::sqrt(static_cast<double>(n));
  std::vector<Vector> replicates(static_cast<std::size_t>(K));
  detail::FirstError error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < K; ++k) {
    try {
      Matrix m = scale * sample_goe(n, result.seeds[static_cast<std::size_t>(k)]);
      m.diagonal() += diag;
      const SpectralDecomposition g = eigh_trusted(m);
      replicates[static_cast<std::size_t>(k)] =
          kernels::parallel::overlap_diagonal(g.eigenvectors, hv);
    } catch (...) {
      error.capture(k);
    }
  }
  error.rethrow();

  result.d = Vector::Zero(n);
  for (const Vector& r : replicates) result.d += r;
  result.d /= static_cast<double>(K);
  return result;
}

Matrix reconstruct(const SpectralDecomposition& a_hat, const Vector& d) {
  if (d.size() != a_hat.dim()) {
    throw ValidationError("reconstruct: d has length " + std::to_string(d.size()) +
                          ", expected " + std::to_string(a_hat.dim()));
  }
  const Matrix& w = a_hat.eigenvectors;
  Matrix out = w * d.asDiagonal() * w.transpose();
  out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

Matrix apply_function(const SpectralDecomposition& a, const SpectralFunction& h) {
  const std::vector<double> hv = evaluate_finite(h, a.eigenvalues, "apply_function");
  return reconstruct(a, Eigen::Map<const Vector>(hv.data(), a.dim()));
}

double frobenius_loss(const Matrix& m_est, const Matrix& m_true) {
  require_square_same(m_est, m_true, "frobenius_loss");
  return (m_est - m_true).squaredNorm() / static_cast<double>(m_true.rows());
}

double stein_loss(const Matrix& m_true, const Matrix& m_est) {
  require_square_same(m_true, m_est, "stein_loss");
  const auto a = require_pd(m_true, "stein_loss", "M_true");
  const auto b = require_pd(m_est, "stein_loss", "M_est");
  const double n = static_cast<double>(m_true.rows());
  const double tr = a.solve(m_est).trace();
  return (tr - n - (log_det(b) - log_det(a))) / n;
}

double divergence_loss(const Matrix& m_true, const Matrix& m_est) {
  require_square_same(m_true, m_est, "divergence_loss");
  const auto a = require_pd(m_true, "divergence_loss", "M_true");
  const auto b = require_pd(m_est, "divergence_loss", "M_est");
  const double n = static_cast<double>(m_true.rows());
  return (a.solve(m_est).trace() - n + b.solve(m_true).trace() - n) / n;
}

double rel_frob_loss(const Matrix& m_true, const Matrix& m_est) {
  require_square_same(m_true, m_est, "rel_frob_loss");
  const auto a = require_pd(m_true, "rel_frob_loss", "M_true");
  require_pd(m_est, "rel_frob_loss", "M_est");
  const Eigen::Index n = m_true.rows();
  return (a.solve(m_est) - Matrix::Identity(n, n)).squaredNorm() / static_cast<double>(n);
}

double window_average(const Vector& d, double a, double b) {
  if (!(0.0 <= a && a <= b && b <= 1.0)) {
    throw ValidationError("window_average: need 0 <= a <= b <= 1");
  }
  const auto n = d.size();
  const double nd = static_cast<double>(n);
  const auto lo = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(nd * a)));
  const auto hi = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::floor(nd * b)));
  double s = 0.0;
  for (Eigen::Index i = lo; i <= hi; ++i) s += d(i - 1);
  return s / nd;
}

DiscreteSpectrum clip_below(const DiscreteSpectrum& s, double floor) {
  std::vector<double> v = s.values();
  for (double& x : v) x = std::max(x, floor);
  return s.uniform() ? DiscreteSpectrum(std::move(v)) : DiscreteSpectrum(std::move(v), s.weights());
}

LinsysMode parse_linsys_mode(const std::string& name) {
  if (name == "rhs_isotropic" || name == "rhs") return LinsysMode::rhs_isotropic;
  if (name == "solution_isotropic" || name == "solution") return LinsysMode::solution_isotropic;
  throw ValidationError("unknown linear-system mode '" + name + "'");
}

Vector linsys_shrinker_values(const DiscreteSpectrum& lambda_hat, LinsysMode mode,
                              const DiscreteSpectrum& h, double sigma,
                              const StieltjesOptions& options) {
  if (!(sigma >= 0.0)) throw ValidationError("solve_noisy_linsys: sigma must be >= 0");
  const auto n = static_cast<Eigen::Index>(lambda_hat.size());
  Vector f(n);
  if (sigma == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) f(i) = 1.0 / lambda_hat.value(static_cast<std::size_t>(i));
    return f;
  }
  if (mode == LinsysMode::rhs_isotropic) {
    const double scale = std::max({1.0, std::abs(h.max()), std::abs(h.min())});
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (std::abs(h.value(k)) <= 1e-12 * scale) {
        throw ValidationError("solve_noisy_linsys: H has mass at 0; rhs_isotropic needs 1/t");
      }
    }
  }
  const SupportMap support(h, sigma, options);
  detail::FirstError error;
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      const double x = support.nearest(lambda_hat.value(static_cast<std::size_t>(i)));
      const BoundaryStieltjes b = boundary_uv(h, sigma, x, options);
      f(i) = mode == LinsysMode::rhs_isotropic
                 ? shrinker_inverse(h, sigma, b)
                 : shrinker_identity(sigma, b) / shrinker_square(sigma, b);
    } catch (...) {
      error.capture(i);
    }
  }
  error.rethrow();
  return f;
}

Vector solve_noisy_linsys(const SpectralDecomposition& a_hat, const Vector& b, LinsysMode mode,
                          const DiscreteSpectrum& h, double sigma,
                          const StieltjesOptions& options) {
  if (b.size() != a_hat.dim()) {
    throw ValidationError("solve_noisy_linsys: b has length " + std::to_string(b.size()) +
                          ", expected " + std::to_string(a_hat.dim()));
  }
  const Vector f = linsys_shrinker_values(a_hat.eigenvalues, mode, h, sigma, options);
  const Matrix& w = a_hat.eigenvectors;
  return w * (f.array() * (w.transpose() * b).array()).matrix();
}

}  // namespace rmtshrink
