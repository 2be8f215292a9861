// Serial reference kernels vs their OpenMP counterparts: wall time and
// bitwise agreement. Usage: bench_kernels [repeats]
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "rmtshrink/kernels.hpp"
#include "rmtshrink/stieltjes.hpp"

using namespace rmtshrink;
using Clock = std::chrono::steady_clock;

namespace {

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

bool same(const Matrix& a, const Matrix& b) { return a == b; }
bool same(const Vector& a, const Vector& b) { return a == b; }
bool same(double a, double b) { return a == b; }
bool same(const std::vector<BoundaryStieltjes>& a, const std::vector<BoundaryStieltjes>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].u != b[i].u || a[i].v != b[i].v) return false;
  }
  return true;
}

template <typename S, typename P>
void row(const std::string& name, int repeats, S&& serial_fn, P&& parallel_fn) {
  decltype(serial_fn()) s_out{}, p_out{};
  const double ts = best_ms(repeats, [&] { s_out = serial_fn(); });
  const double tp = best_ms(repeats, [&] { p_out = parallel_fn(); });
  std::printf("%-28s %10.2f %10.2f %8.2fx  %s\n", name.c_str(), ts, tp, ts / tp,
              same(s_out, p_out) ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
  std::printf("threads: %d, repeats: %d\n", omp_get_max_threads(), repeats);
  std::printf("%-28s %10s %10s %9s  %s\n", "kernel", "serial ms", "omp ms", "speedup", "output");

  const Eigen::Index n = 1000;
  row("fill_wigner n=1000", repeats,
      [&] { return kernels::serial::fill_wigner(n, NoiseDistribution::gaussian, 1.41421356, 7); },
      [&] { return kernels::parallel::fill_wigner(n, NoiseDistribution::gaussian, 1.41421356, 7); });

  const Matrix c = kernels::serial::fill_wigner(n, NoiseDistribution::gaussian, 1.0, 3);
  std::vector<double> h(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = 1.0 + static_cast<double>(i % 3);
  row("overlap_diagonal n=1000", repeats, [&] { return kernels::serial::overlap_diagonal(c, h); },
      [&] { return kernels::parallel::overlap_diagonal(c, h); });
  row("weighted_row_squares n=1000", repeats,
      [&] { return kernels::serial::weighted_row_squares(c, h); },
      [&] { return kernels::parallel::weighted_row_squares(c, h); });

  const Matrix pts = c.leftCols(2);
  row("gaussian_kernel 1000 pts", repeats, [&] { return kernels::serial::gaussian_kernel(pts, 0.1); },
      [&] { return kernels::parallel::gaussian_kernel(pts, 0.1); });

  std::vector<double> vals(2000), wts(2000, 1.0 / 2000.0);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 1.0 + 0.004 * static_cast<double>(i % 1500);
  auto sq = [](double t) { return t * t; };
  auto dsq = [](double t) { return 2.0 * t; };
  row("divided_difference 2000", repeats,
      [&] { return kernels::serial::divided_difference_energy(vals, wts, sq, dsq); },
      [&] { return kernels::parallel::divided_difference_energy(vals, wts, sq, dsq); });

  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 300);
  std::vector<double> xs(200);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = -1.0 + 12.0 * static_cast<double>(i) / 199.0;
  const StieltjesOptions opts;
  row("boundary_grid 200 x", repeats,
      [&] { return kernels::serial::boundary_grid(spec, 1.0, xs, opts); },
      [&] { return kernels::parallel::boundary_grid(spec, 1.0, xs, opts); });
  return 0;
}
