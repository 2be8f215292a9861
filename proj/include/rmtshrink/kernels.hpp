#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rmtshrink/rmt_core.hpp"

namespace rmtshrink {
struct BoundaryStieltjes;
struct StieltjesOptions;
}  // namespace rmtshrink

// Data-parallel inner loops. `serial` is the reference implementation kept
// for testing and benchmarking; `parallel` is what the library calls. Each
// output element is produced by exactly one thread with the same operation
// order as the serial loop, so both variants agree bit for bit.
namespace rmtshrink::kernels {

namespace serial {

/// Symmetric matrix whose row i (entries i..n-1) is drawn from stream i of
/// `seed`; diagonal draws are multiplied by `diagonal_scale`.
Matrix fill_wigner(Eigen::Index n, NoiseDistribution dist, double diagonal_scale,
                   std::uint64_t seed);

/// d_i = sum_k h_k * C(k, i)^2
Vector overlap_diagonal(const Matrix& c, std::span<const double> h);

/// g_i = sum_j r_j * X(i, j)^2
Vector weighted_row_squares(const Matrix& x, std::span<const double> r);

/// K_ij = exp(-|p_i - p_j|^2 / (2 bandwidth^2)) for points stored as rows.
Matrix gaussian_kernel(const Matrix& points, double bandwidth);

/// sum_{k,l} w_k w_l q(k,l)^2 where q is the divided difference of h, with
/// h'(lambda_k) on the diagonal and on coincident atoms.
double divided_difference_energy(std::span<const double> values, std::span<const double> weights,
                                 const std::function<double(double)>& h,
                                 const std::function<double(double)>& h_prime);

std::vector<BoundaryStieltjes> boundary_grid(const DiscreteSpectrum& h, double sigma,
                                             std::span<const double> xs,
                                             const StieltjesOptions& options);

}  // namespace serial

namespace parallel {

Matrix fill_wigner(Eigen::Index n, NoiseDistribution dist, double diagonal_scale,
                   std::uint64_t seed);
Vector overlap_diagonal(const Matrix& c, std::span<const double> h);
Vector weighted_row_squares(const Matrix& x, std::span<const double> r);
Matrix gaussian_kernel(const Matrix& points, double bandwidth);
double divided_difference_energy(std::span<const double> values, std::span<const double> weights,
                                 const std::function<double(double)>& h,
                                 const std::function<double(double)>& h_prime);
std::vector<BoundaryStieltjes> boundary_grid(const DiscreteSpectrum& h, double sigma,
                                             std::span<const double> xs,
                                             const StieltjesOptions& options);

}  // namespace parallel

}  // namespace rmtshrink::kernels
