#include <cmath>
#include <exception>

#include <omp.h>

#include "rmtshrink/detail/first_error.hpp"
#include "rmtshrink/kernels.hpp"
#include "rmtshrink/stieltjes.hpp"

namespace rmtshrink::kernels::parallel {

using detail::FirstError;

Matrix fill_wigner(Eigen::Index n, NoiseDistribution dist, double diagonal_scale,
                   std::uint64_t seed) {
  Matrix m(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    EntrySampler sample(dist, CounterRng(seed, static_cast<std::uint64_t>(i)));
    m(i, i) = diagonal_scale * sample();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = sample();
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

Vector overlap_diagonal(const Matrix& c, std::span<const double> h) {
  Vector d(c.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < c.cols(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < c.rows(); ++k) {
      const double ck = c(k, i);
      s += h[static_cast<std::size_t>(k)] * ck * ck;
    }
    d(i) = s;
  }
  return d;
}

Vector weighted_row_squares(const Matrix& x, std::span<const double> r) {
  Vector g(x.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double xij = x(i, j);
      s += r[static_cast<std::size_t>(j)] * xij * xij;
    }
    g(i) = s;
  }
  return g;
}

Matrix gaussian_kernel(const Matrix& points, double bandwidth) {
  const Eigen::Index n = points.rows();
  const double denom = 2.0 * bandwidth * bandwidth;
  Matrix k(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = std::exp(-(points.row(i) - points.row(j)).squaredNorm() / denom);
    }
  }
  return k;
}

double divided_difference_energy(std::span<const double> values, std::span<const double> weights,
                                 const std::function<double(double)>& h,
                                 const std::function<double(double)>& h_prime) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  double scale = 1.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  std::vector<double> rows(values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double hk = h(values[ku]);
    double row = 0.0;
    for (std::size_t l = 0; l < values.size(); ++l) {
      const double dx = values[ku] - values[l];
      const double q =
          std::abs(dx) <= 1e-14 * scale ? h_prime(values[ku]) : (hk - h(values[l])) / dx;
      row += weights[l] * q * q;
    }
    rows[ku] = row;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) total += weights[k] * rows[k];
  return total;
}

std::vector<BoundaryStieltjes> boundary_grid(const DiscreteSpectrum& h, double sigma,
                                             std::span<const double> xs,
                                             const StieltjesOptions& options) {
  std::vector<BoundaryStieltjes> out(xs.size());
  FirstError error;
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          boundary_uv(h, sigma, xs[static_cast<std::size_t>(i)], options);
    } catch (...) {
      error.capture(i);
    }
  }
  error.rethrow();
  return out;
}

}  // namespace rmtshrink::kernels::parallel
