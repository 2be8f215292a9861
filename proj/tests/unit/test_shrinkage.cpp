#include <doctest.h>

#include <cmath>
#include <vector>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/shrinkage.hpp"

using namespace rmtshrink;

namespace {

struct Instance {
  SpectralDecomposition a;
  SpectralDecomposition a_hat;
};

Instance make_instance(const DiscreteSpectrum& spec, double sigma, std::uint64_t seed) {
  const NoisyModel model{spec, sigma, NoiseKind::gaussian_orthogonal(), seed, std::nullopt};
  return {eigh(model.population()), eigh(model.observe())};
}

}  // namespace

TEST_CASE("oracle shrinkage preserves the trace and stays within the range of h") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 150);
  const Instance inst = make_instance(spec, 1.0, 3);
  for (const auto& h : {SpectralFunction::identity(), SpectralFunction::inverse(),
                        SpectralFunction::sqrt(), SpectralFunction::square()}) {
    CAPTURE(h.name);
    const Vector d = oracle_d(inst.a, inst.a_hat, h);
    double trace = 0.0, lo = 1e300, hi = -1e300;
    for (double t : spec.values()) {
      trace += h(t);
      lo = std::min(lo, h(t));
      hi = std::max(hi, h(t));
    }
    CHECK(d.sum() == doctest::Approx(trace).epsilon(1e-10));
    CHECK(d.minCoeff() >= lo - 1e-10);
    CHECK(d.maxCoeff() <= hi + 1e-10);
  }
  const Vector c = oracle_d(inst.a, inst.a_hat, SpectralFunction::one());
  CHECK((c.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("oracle shrinkage without noise reproduces h of the eigenvalues") {
  const DiscreteSpectrum spec({0.5, 2.0, 3.0, 7.0});
  const Instance inst = make_instance(spec, 0.0, 1);
  const Vector d = oracle_d(inst.a, inst.a_hat, SpectralFunction::square());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    CHECK(d(i) == doctest::Approx(spec.value(static_cast<std::size_t>(i)) *
                                  spec.value(static_cast<std::size_t>(i))));
  }
}

TEST_CASE("oracle shrinkage is loss-optimal among eigenvalue rescalings") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 120);
  const Instance inst = make_instance(spec, 1.0, 8);
  const auto h = SpectralFunction::square();
  const Matrix truth = apply_function(inst.a, h);
  const Vector d = oracle_d(inst.a, inst.a_hat, h);
  const double best = frobenius_loss(reconstruct(inst.a_hat, d), truth);
  const double naive = frobenius_loss(apply_function(inst.a_hat, h), truth);
  CHECK(best < naive);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector perturb = 0.05 * sample_goe(d.size(), s).col(0);
    CHECK(frobenius_loss(reconstruct(inst.a_hat, d + perturb), truth) > best);
  }
}

TEST_CASE("oracle shrinkage small- and large-noise limits") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 300);
  const auto h = SpectralFunction::square();
  const double sigma = 1e-3;
  const Instance small = make_instance(spec, sigma, 2);
  const Vector d = oracle_d(small.a, small.a_hat, h);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    worst = std::max(worst, std::abs(d(i) - h(spec.value(static_cast<std::size_t>(i)))));
  }
  CHECK(worst < 0.1 * sigma);

  const Instance large = make_instance(spec, 1e3, 2);
  const Vector dl = oracle_d(large.a, large.a_hat, SpectralFunction::identity());
  for (double a : {0.0, 1.0 / 3.0, 2.0 / 3.0}) {
    CHECK(3.0 * window_average(dl, a, a + 1.0 / 3.0) ==
          doctest::Approx(spec.mean()).epsilon(0.05));
  }
}

TEST_CASE("monte carlo shrinkage basics") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 60);
  const ShrinkageResult zero = mc_shrink(0.0, spec, SpectralFunction::sqrt(), 3, 1);
  for (Eigen::Index i = 0; i < zero.d.size(); ++i) {
    CHECK(zero.d(i) == std::sqrt(spec.value(static_cast<std::size_t>(i))));
  }
  const ShrinkageResult ones = mc_shrink(1.0, spec, SpectralFunction::one(), 2, 1);
  CHECK((ones.d.array() - 1.0).abs().maxCoeff() < 1e-12);

  const ShrinkageResult a = mc_shrink(1.0, spec, SpectralFunction::identity(), 4, 9);
  const ShrinkageResult b = mc_shrink(1.0, spec, SpectralFunction::identity(), 4, 9);
  CHECK(a.d == b.d);
  CHECK(a.K == 4);
  REQUIRE(a.seeds.size() == 4);
  CHECK(a.seeds[2] == derive_seed(9, 2));
  CHECK(a.d.sum() == doctest::Approx(60.0 * spec.mean()).epsilon(1e-10));

  CHECK_THROWS_AS(mc_shrink(1.0, spec, SpectralFunction::identity(), 0, 1), ValidationError);
  CHECK_THROWS_AS(mc_shrink(-1.0, spec, SpectralFunction::identity(), 1, 1), ValidationError);
  CHECK_THROWS_WITH_AS(mc_shrink(1.0, DiscreteSpectrum({0.0, 1.0}), SpectralFunction::inverse(), 1, 1),
                       doctest::Contains("not finite"), ValidationError);
}

TEST_CASE("monte carlo variance decays like 1/K") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 60);
  const int reps = 10;
  std::vector<double> log_k, log_var;
  for (int k : {1, 4, 16}) {
    std::vector<Vector> runs;
    for (int r = 0; r < reps; ++r) {
      runs.push_back(mc_shrink(1.0, spec, SpectralFunction::identity(), k, 1000 + r).d);
    }
    Vector mean = Vector::Zero(60);
    for (const Vector& v : runs) mean += v / reps;
    double var = 0.0;
    for (const Vector& v : runs) var += (v - mean).squaredNorm() / (reps - 1) / 60.0;
    log_k.push_back(std::log(k));
    log_var.push_back(std::log(var));
  }
  const double slope = (log_var[2] - log_var[0]) / (log_k[2] - log_k[0]);
  CHECK(slope < -0.7);
  CHECK(slope > -1.3);
}

TEST_CASE("reconstruct") {
  const DiscreteSpectrum spec = DiscreteSpectrum::balanced({1.0, 4.0}, 40);
  const NoisyModel model{spec, 1.0, NoiseKind::gaussian_orthogonal(), 5, std::nullopt};
  const Matrix obs = model.observe();
  const SpectralDecomposition e = eigh(obs);
  CHECK((reconstruct(e, e.values()) - obs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(reconstruct(e, Vector::Zero(40)).norm() == 0.0);
  const Matrix r = reconstruct(e, Vector::LinSpaced(40, 1.0, 2.0));
  CHECK(r == r.transpose());
  CHECK_THROWS_AS(reconstruct(e, Vector::Zero(39)), ValidationError);
}

TEST_CASE("matrix losses") {
  Matrix a(1, 1), b(1, 1);
  a << 2.0;
  b << 4.0;
  CHECK(stein_loss(a, b) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  a << 1.0;
  b << 2.0;
  CHECK(divergence_loss(a, b) == doctest::Approx(0.5));
  CHECK(rel_frob_loss(a, b) == doctest::Approx(1.0));
  CHECK(frobenius_loss(a, b) == doctest::Approx(1.0));
  const Matrix id = Matrix::Identity(4, 4);
  CHECK(stein_loss(id * 3.0, id * 3.0) == doctest::Approx(0.0));
  CHECK(divergence_loss(id * 3.0, id * 3.0) == doctest::Approx(0.0));
  b << -1.0;
  CHECK_THROWS_WITH_AS(stein_loss(a, b), doctest::Contains("M_est"), ValidationError);
  CHECK_THROWS_WITH_AS(divergence_loss(b, a), doctest::Contains("M_true"), ValidationError);
  CHECK_THROWS_AS(frobenius_loss(a, id), ValidationError);
}

TEST_CASE("window average and clipping") {
  const Vector d = Vector::LinSpaced(10, 1.0, 10.0);
  CHECK(window_average(d, 0.2, 0.5) == doctest::Approx((2.0 + 3.0 + 4.0 + 5.0) / 10.0));
  CHECK(window_average(d, 0.0, 1.0) == doctest::Approx(5.5));
  CHECK_THROWS_AS(window_average(d, 0.6, 0.5), ValidationError);
  const DiscreteSpectrum c = clip_below(DiscreteSpectrum({-1.0, 0.1, 2.0}), 0.3);
  CHECK(c.values() == std::vector<double>{2.0, 0.3, 0.3});
}

TEST_CASE("noisy linear systems") {
  const DiscreteSpectrum spec({1.0, 2.0, 5.0, 10.0});
  const Instance clean = make_instance(spec, 0.0, 1);
  Vector b(4);
  b << 1.0, -2.0, 0.5, 3.0;
  const Matrix a = clean.a.eigenvectors * clean.a.values().asDiagonal() *
                   clean.a.eigenvectors.transpose();
  const Vector exact = a.ldlt().solve(b);
  for (auto mode : {LinsysMode::rhs_isotropic, LinsysMode::solution_isotropic}) {
    CHECK((solve_noisy_linsys(clean.a_hat, b, mode, spec, 0.0) - exact).norm() < 1e-12);
  }
  CHECK(parse_linsys_mode("rhs") == LinsysMode::rhs_isotropic);
  CHECK(parse_linsys_mode("solution_isotropic") == LinsysMode::solution_isotropic);
  CHECK_THROWS_AS(parse_linsys_mode("both"), ValidationError);

  const DiscreteSpectrum big = DiscreteSpectrum::balanced({1.0, 10.0}, 100);
  const Instance noisy = make_instance(big, 1.0, 4);
  const Vector f = linsys_shrinker_values(noisy.a_hat.eigenvalues, LinsysMode::rhs_isotropic,
                                          big, 1.0);
  CHECK(f.minCoeff() > 0.0);
  CHECK(f.maxCoeff() <= 1.0 + 1e-9);
  const Vector g = linsys_shrinker_values(noisy.a_hat.eigenvalues, LinsysMode::solution_isotropic,
                                          big, 1.0);
  CHECK(g.minCoeff() > 0.0);
  CHECK_THROWS_AS(linsys_shrinker_values(noisy.a_hat.eigenvalues, LinsysMode::rhs_isotropic,
                                         DiscreteSpectrum({0.0, 1.0}), 1.0),
                  ValidationError);
  CHECK_THROWS_AS(solve_noisy_linsys(noisy.a_hat, b, LinsysMode::rhs_isotropic, big, 1.0),
                  ValidationError);
}
