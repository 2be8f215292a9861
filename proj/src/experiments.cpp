#include "rmtshrink/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/io.hpp"
#include "rmtshrink/kernels.hpp"
#include "rmtshrink/shrinkage.hpp"

namespace rmtshrink {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Derived-seed slots for the pieces of one instance.
enum Slot : std::uint64_t { kSlotA = 0, kSlotNoise = 1, kSlotRecovery = 2, kSlotMc = 3, kSlotRhs = 4 };

std::uint64_t slot_seed(std::uint64_t base, Slot s) { return derive_seed(base, s); }

DiscreteSpectrum population_spectrum(const ExperimentConfig& c, int n, std::uint64_t base) {
  if (!c.random_levels) return DiscreteSpectrum::balanced(c.h_levels, static_cast<std::size_t>(n));
  CounterRng rng(slot_seed(base, kSlotA));
  std::uniform_int_distribution<std::size_t> pick(0, c.h_levels.size() - 1);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = c.h_levels[pick(rng)];
  return DiscreteSpectrum(std::move(v));
}

Matrix observe(const Matrix& a, double sigma, const NoiseKind& noise, std::uint64_t base) {
  const Eigen::Index n = a.rows();
  return a + (sigma / std::sqrt(static_cast<double>(n))) *
                 sample_noise(n, noise, slot_seed(base, kSlotNoise));
}

Matrix diag_matrix(const DiscreteSpectrum& s) {
  return Eigen::Map<const Vector>(s.values().data(), static_cast<Eigen::Index>(s.size()))
      .asDiagonal();
}

double nmse(const DiscreteSpectrum& t_star, const DiscreteSpectrum& truth) {
  return spectrum_mse(t_star, truth) / truth.variance();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string stem(const ExperimentConfig& c) { return to_string(c.id); }

class Writer {
 public:
  explicit Writer(const ExperimentConfig& c) : c_(c) {}

  void series(const std::string& suffix, const std::vector<io::Column>& columns) {
    const auto path = c_.output_dir / (stem(c_) + "_" + suffix + ".csv");
    io::write_series(path, columns);
    files_.push_back(path);
  }

  std::vector<std::filesystem::path> files() const { return files_; }

 private:
  const ExperimentConfig& c_;
  std::vector<std::filesystem::path> files_;
};

// Recovered spectra are averaged over seeds, one (n, seed) job at a time.
void run_fig1(const ExperimentConfig& c, Writer& w, json& summary) {
  std::vector<double> ns, mean_nmse, sd_nmse;
  std::vector<double> snap_n, snap_i, snap_t, snap_l;
  for (int n : c.n_grid) {
    std::vector<double> values;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      const std::uint64_t base = derive_seed(c.seeds[s], static_cast<std::uint64_t>(n));
      const DiscreteSpectrum lambda = population_spectrum(c, n, base);
      const double sigma = std::sqrt(*c.sigma2);
      const Matrix a_hat = observe(diag_matrix(lambda), sigma, c.noise, base);
      const DiscreteSpectrum lambda_hat(to_std(eigvalsh_trusted(a_hat)));
      RecoveryConfig rc = c.recovery;
      rc.K_reg = c.K;
      const RecoveryResult r =
          recover_spectrum(lambda_hat, sigma, c.restarts, slot_seed(base, kSlotRecovery), rc);
      values.push_back(nmse(r.t_star, lambda));
      if (s == 0 && std::find(c.snapshot_ns.begin(), c.snapshot_ns.end(), n) != c.snapshot_ns.end()) {
        for (std::size_t i = 0; i < lambda.size(); ++i) {
          snap_n.push_back(n);
          snap_i.push_back(static_cast<double>(i + 1));
          snap_t.push_back(r.t_star.value(i));
          snap_l.push_back(lambda.value(i));
        }
      }
    }
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    var /= static_cast<double>(values.size());
    ns.push_back(n);
    mean_nmse.push_back(m);
    sd_nmse.push_back(std::sqrt(var));
  }
  w.series("nmse", {{"n", ns}, {"nmse", mean_nmse}, {"nmse_sd", sd_nmse}});
  if (!snap_n.empty()) {
    w.series("snapshots", {{"n", snap_n}, {"i", snap_i}, {"t_star", snap_t}, {"lambda", snap_l}});
  }
  summary["nmse"] = json::object();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    summary["nmse"][std::to_string(static_cast<int>(ns[i]))] = mean_nmse[i];
  }
  summary["seeds_per_point"] = c.seeds.size();
}

void run_fig2(const ExperimentConfig& c, Writer& w, json& summary) {
  const std::uint64_t base = c.seeds.front();
  const Matrix points = sample_circle_points(c.kernel, slot_seed(base, kSlotA));
  const Matrix a = build_kernel_matrix(c.kernel, slot_seed(base, kSlotA));
  const double sigma = std::sqrt(*c.sigma2);
  const Matrix a_hat = observe(a, sigma, c.noise, base);
  const DiscreteSpectrum lambda(to_std(eigvalsh_trusted(a)));
  const DiscreteSpectrum lambda_hat(to_std(eigvalsh_trusted(a_hat)));
  RecoveryConfig rc = c.recovery;
  rc.K_reg = c.K;
  const RecoveryResult r =
      recover_spectrum(lambda_hat, sigma, c.restarts, slot_seed(base, kSlotRecovery), rc);

  std::vector<double> px, py, label;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    px.push_back(points(i, 0));
    py.push_back(points(i, 1));
    label.push_back(i < c.kernel.points_per_circle ? 0.0 : 1.0);
  }
  w.series("points", {{"x", px}, {"y", py}, {"circle", label}});
  std::vector<double> idx(lambda.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i + 1);
  w.series("eigenvalues", {{"i", idx},
                           {"lambda_hat", lambda_hat.values()},
                           {"lambda", lambda.values()},
                           {"t_star", r.t_star.values()}});
  summary["nmse"] = nmse(r.t_star, lambda);
  summary["nmse_observed"] = nmse(lambda_hat, lambda);
  summary["objective"] = r.objective;
}

void run_fig3(const ExperimentConfig& c, Writer& w, json& summary) {
  const std::uint64_t base = c.seeds.front();
  const DiscreteSpectrum lambda = population_spectrum(c, c.n, base);
  const double true_sigma2 = c.sigma2.value_or(1.0);
  const Matrix a_hat = observe(diag_matrix(lambda), std::sqrt(true_sigma2), c.noise, base);
  const DiscreteSpectrum lambda_hat(to_std(eigvalsh_trusted(a_hat)));
  const NoiseSweep sweep = estimate_noise(lambda_hat, c.sigma2_grid, c.restarts,
                                          slot_seed(base, kSlotRecovery), c.threshold_frac,
                                          c.recovery);
  std::vector<double> chosen(sweep.grid.size(), 0.0);
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    if (sweep.objectives[i] <= sweep.threshold) chosen[i] = 1.0;
  }
  w.series("sweep", {{"sigma2", sweep.grid}, {"objective", sweep.objectives}, {"below_threshold", chosen}});

  RecoveryConfig rc = c.recovery;
  rc.K_reg = c.K;
  const RecoveryResult r = recover_spectrum(lambda_hat, std::sqrt(sweep.chosen_sigma2), c.restarts,
                                            slot_seed(base, kSlotMc), rc);
  std::vector<double> idx(lambda.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i + 1);
  w.series("eigenvalues", {{"i", idx},
                           {"lambda_hat", lambda_hat.values()},
                           {"lambda", lambda.values()},
                           {"t_star", r.t_star.values()}});
  summary["chosen_sigma2"] = sweep.chosen_sigma2;
  summary["true_sigma2"] = true_sigma2;
  summary["threshold"] = sweep.threshold;
  summary["grid"] = sweep.grid;
  summary["objectives"] = sweep.objectives;
  summary["warnings"] = sweep.warnings;
  summary["nmse"] = nmse(r.t_star, lambda);
}

void run_linsys(const ExperimentConfig& c, Writer& w, json& summary) {
  const int n = c.n;
  struct Errors {
    double inverse = 0.0, ratio = 0.0, naive = 0.0;
  };
  std::vector<Errors> rhs(c.sigma2_grid.size()), sol(c.sigma2_grid.size());
  for (std::size_t g = 0; g < c.sigma2_grid.size(); ++g) {
    const double sigma = std::sqrt(c.sigma2_grid[g]);
    for (std::uint64_t seed : c.seeds) {
      const std::uint64_t base = derive_seed(seed, g);
      const DiscreteSpectrum lambda = population_spectrum(c, n, base);
      const Matrix a = diag_matrix(lambda);
      const Matrix a_hat = observe(a, sigma, c.noise, base);
      const SpectralDecomposition dec = eigh_trusted(a_hat);
      const Vector f_inv = linsys_shrinker_values(dec.eigenvalues, LinsysMode::rhs_isotropic,
                                                  lambda, sigma);
      const Vector f_ratio = linsys_shrinker_values(dec.eigenvalues,
                                                    LinsysMode::solution_isotropic, lambda, sigma);
      const Vector naive = dec.values().cwiseInverse();
      const Matrix& wv = dec.eigenvectors;
      const Vector a_diag = a.diagonal();

      EntrySampler normal(NoiseDistribution::gaussian, CounterRng(slot_seed(base, kSlotRhs)));
      for (int scenario = 0; scenario < 2; ++scenario) {
        Vector draw(n);
        for (int i = 0; i < n; ++i) draw(i) = normal();
        const Vector b = scenario == 0 ? draw : Vector(a_diag.cwiseProduct(draw));
        const Vector x_star = scenario == 0 ? Vector(draw.cwiseQuotient(a_diag)) : draw;
        const Vector wb = wv.transpose() * b;
        auto err = [&](const Vector& f) {
          const Vector x = wv * f.cwiseProduct(wb);
          return (x - x_star).squaredNorm() / x_star.squaredNorm();
        };
        Errors& e = scenario == 0 ? rhs[g] : sol[g];
        e.inverse += err(f_inv);
        e.ratio += err(f_ratio);
        e.naive += err(naive);
      }
    }
  }
  const double k = static_cast<double>(c.seeds.size());
  auto emit = [&](const std::string& name, const std::vector<Errors>& errs) {
    std::vector<double> inv, ratio, naive;
    for (const auto& e : errs) {
      inv.push_back(e.inverse / k);
      ratio.push_back(e.ratio / k);
      naive.push_back(e.naive / k);
    }
    w.series(name, {{"sigma2", c.sigma2_grid},
                    {"inverse_shrinker", inv},
                    {"ratio_shrinker", ratio},
                    {"naive_inverse", naive}});
    summary[name] = {{"sigma2", c.sigma2_grid},
                     {"inverse_shrinker", inv},
                     {"ratio_shrinker", ratio},
                     {"naive_inverse", naive}};
  };
  emit("rhs_isotropic", rhs);
  emit("solution_isotropic", sol);
}

void run_fig6(const ExperimentConfig& c, Writer& w, json& summary) {
  const int n = c.n;
  struct Target {
    std::string name;
    SpectralFunction h;
    double clip;
  };
  const std::vector<Target> targets = {
      {"t", SpectralFunction::identity(), -std::numeric_limits<double>::infinity()},
      {"inv", SpectralFunction::inverse(), c.clip_inverse},
      {"sqrt", SpectralFunction::sqrt(), 0.0},
  };
  const std::size_t g_count = c.sigma_grid.size();
  std::vector<std::vector<double>> oracle(targets.size(), std::vector<double>(g_count, 0.0));
  auto pipeline = oracle;
  std::vector<double> none(g_count, 0.0);
  const double k = static_cast<double>(c.seeds.size());

  for (std::size_t g = 0; g < g_count; ++g) {
    const double sigma = c.sigma_grid[g];
    for (std::uint64_t seed : c.seeds) {
      const std::uint64_t base = derive_seed(seed, g);
      const DiscreteSpectrum lambda = population_spectrum(c, n, base);
      const Matrix a = diag_matrix(lambda);
      const SpectralDecomposition a_dec{lambda, Matrix::Identity(n, n)};
      const Matrix a_hat = observe(a, sigma, c.noise, base);
      const SpectralDecomposition dec = eigh_trusted(a_hat);
      RecoveryConfig rc = c.recovery;
      const RecoveryResult r = recover_spectrum(dec.eigenvalues, sigma, c.restarts,
                                                slot_seed(base, kSlotRecovery), rc);
      none[g] += frobenius_loss(a_hat, a) / k;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const Matrix truth = apply_function(a_dec, targets[t].h);
        const Vector d_oracle = oracle_d(a_dec, dec, targets[t].h);
        oracle[t][g] += frobenius_loss(reconstruct(dec, d_oracle), truth) / k;
        const DiscreteSpectrum recovered =
            std::isfinite(targets[t].clip) ? clip_below(r.t_star, targets[t].clip) : r.t_star;
        const ShrinkageResult mc =
            mc_shrink(sigma, recovered, targets[t].h, c.K, slot_seed(base, kSlotMc));
        pipeline[t][g] += frobenius_loss(reconstruct(dec, mc.d), truth) / k;
      }
    }
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<io::Column> cols = {{"sigma", c.sigma_grid},
                                    {"oracle", oracle[t]},
                                    {"pipeline", pipeline[t]}};
    if (targets[t].name == "t") cols.push_back({"no_shrinkage", none});
    w.series(targets[t].name, cols);
    std::vector<double> ratio(g_count);
    for (std::size_t g = 0; g < g_count; ++g) ratio[g] = pipeline[t][g] / oracle[t][g];
    summary[targets[t].name] = {{"sigma", c.sigma_grid},
                                {"oracle", oracle[t]},
                                {"pipeline", pipeline[t]},
                                {"pipeline_over_oracle", ratio}};
  }
  summary["no_shrinkage_reported_for"] = "t";
}

json recovery_to_json(const RecoveryConfig& r) {
  return {{"max_iterations", r.max_iterations}, {"armijo_c", r.armijo_c},
          {"backtrack", r.backtrack},           {"max_backtracks", r.max_backtracks},
          {"grad_tol_per_n", r.grad_tol_per_n}, {"lbfgs_above", r.lbfgs_above},
          {"lbfgs_memory", r.lbfgs_memory},     {"K_reg", r.K_reg},
          {"stall_rel", r.stall_rel},           {"stall_window", r.stall_window}};
}

RecoveryConfig recovery_from_json(const json& j) {
  RecoveryConfig r;
  r.max_iterations = j.value("max_iterations", r.max_iterations);
  r.armijo_c = j.value("armijo_c", r.armijo_c);
  r.backtrack = j.value("backtrack", r.backtrack);
  r.max_backtracks = j.value("max_backtracks", r.max_backtracks);
  r.grad_tol_per_n = j.value("grad_tol_per_n", r.grad_tol_per_n);
  r.lbfgs_above = j.value("lbfgs_above", r.lbfgs_above);
  r.lbfgs_memory = j.value("lbfgs_memory", r.lbfgs_memory);
  r.K_reg = j.value("K_reg", r.K_reg);
  r.stall_rel = j.value("stall_rel", r.stall_rel);
  r.stall_window = j.value("stall_window", r.stall_window);
  return r;
}

std::string noise_name(const NoiseKind& k) { return k.goe ? "goe" : to_string(k.iid); }

NoiseKind noise_from_name(const std::string& s) {
  if (s == "goe") return NoiseKind::gaussian_orthogonal();
  return NoiseKind::wigner(parse_distribution(s));
}

}  // namespace

ExperimentId parse_experiment(const std::string& name) {
  for (int f = 1; f <= 6; ++f) {
    const ExperimentId id = experiment_for_figure(f);
    if (to_string(id) == name) return id;
  }
  throw ValidationError("unknown experiment '" + name + "'");
}

ExperimentId experiment_for_figure(int figure) {
  switch (figure) {
    case 1: return ExperimentId::fig1_deconv;
    case 2: return ExperimentId::fig2_kernel;
    case 3: return ExperimentId::fig3_unknown_sigma;
    case 4: return ExperimentId::fig4_linsys_a;
    case 5: return ExperimentId::fig5_linsys_b;
    case 6: return ExperimentId::fig6_shrinkers;
    default: throw ValidationError("figure must be 1..6, got " + std::to_string(figure));
  }
}

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::fig1_deconv: return "fig1_deconv";
    case ExperimentId::fig2_kernel: return "fig2_kernel";
    case ExperimentId::fig3_unknown_sigma: return "fig3_unknown_sigma";
    case ExperimentId::fig4_linsys_a: return "fig4_linsys_a";
    case ExperimentId::fig5_linsys_b: return "fig5_linsys_b";
    case ExperimentId::fig6_shrinkers: return "fig6_shrinkers";
  }
  throw ValidationError("unknown experiment id");
}

void KernelRecipe::validate() const {
  if (points_per_circle < 1 || !(radius_inner > 0.0) || !(radius_outer > 0.0) ||
      !(coord_noise_sd > 0.0) || !(bandwidth > 0.0)) {
    throw ValidationError("kernel recipe: all parameters must be positive");
  }
}

Matrix sample_circle_points(const KernelRecipe& recipe, std::uint64_t seed) {
  recipe.validate();
  const int m = recipe.points_per_circle;
  Matrix p(2 * m, 2);
  CounterRng angle_rng(seed, 0);
  EntrySampler normal(NoiseDistribution::gaussian, CounterRng(seed, 1));
  for (int i = 0; i < 2 * m; ++i) {
    const double radius = i < m ? recipe.radius_inner : recipe.radius_outer;
    const double theta = 2.0 * std::numbers::pi * angle_rng.uniform();
    p(i, 0) = radius * std::cos(theta) + recipe.coord_noise_sd * normal();
    p(i, 1) = radius * std::sin(theta) + recipe.coord_noise_sd * normal();
  }
  return p;
}

Matrix build_kernel_matrix(const KernelRecipe& recipe, std::uint64_t seed) {
  return kernels::parallel::gaussian_kernel(sample_circle_points(recipe, seed), recipe.bandwidth);
}

ExperimentConfig ExperimentConfig::defaults(ExperimentId id) {
  ExperimentConfig c;
  c.id = id;
  c.seeds = {20240101};
  switch (id) {
    case ExperimentId::fig1_deconv:
      c.sigma2 = 1.0;
      c.h_levels = {1.0, 4.0, 9.0};
      for (int n = 50; n <= 1000; n += 50) c.n_grid.push_back(n);
      c.n = c.n_grid.back();
      c.snapshot_ns = {250, 500, 750, 1000};
      c.seeds = {1, 2, 3, 4, 5};
      break;
    case ExperimentId::fig2_kernel:
      c.n = 200;
      c.sigma2 = 2.0;
      break;
    case ExperimentId::fig3_unknown_sigma:
      c.n = 200;
      c.sigma2 = 1.0;  // used only to generate the data
      c.h_levels = {5.0, 10.0};
      c.noise = NoiseKind::wigner(NoiseDistribution::laplace);
      for (int i = 0; i <= 20; ++i) c.sigma2_grid.push_back(0.5 + 0.05 * i);
      break;
    case ExperimentId::fig4_linsys_a:
      c.n = 500;
      c.h_levels = {1.0, 10.0};
      c.sigma2_grid = {0.25, 0.5, 1.0, 2.0};
      c.seeds = {1, 2, 3, 4, 5};
      break;
    case ExperimentId::fig5_linsys_b:
      c.n = 200;
      c.h_levels = {1.0, 4.0, 9.0};
      c.sigma2_grid = {0.25, 0.5, 1.0, 2.0};
      c.seeds = {1, 2, 3, 4, 5};
      break;
    case ExperimentId::fig6_shrinkers:
      c.n = 500;
      c.h_levels = {1.0, 4.0, 9.0};
      c.random_levels = true;
      c.sigma_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (n < 10) throw ValidationError("experiment: n must be >= 10");
  if (sigma2 && !(*sigma2 > 0.0)) throw ValidationError("experiment: sigma2 must be > 0");
  if (seeds.empty()) throw ValidationError("experiment: seeds must be nonempty");
  if (restarts < 1) throw ValidationError("experiment: restarts must be >= 1");
  if (K < 1) throw ValidationError("experiment: K must be >= 1");
  const bool needs_levels = id != ExperimentId::fig2_kernel;
  if (needs_levels && h_levels.empty()) throw ValidationError("experiment: h_levels is empty");
  switch (id) {
    case ExperimentId::fig1_deconv:
      if (n_grid.empty()) throw ValidationError("fig1_deconv: n_grid is empty");
      for (int m : n_grid) {
        if (m < 10) throw ValidationError("fig1_deconv: every n must be >= 10");
      }
      if (!sigma2) throw ValidationError("fig1_deconv: sigma2 is required");
      break;
    case ExperimentId::fig2_kernel:
      kernel.validate();
      if (!sigma2) throw ValidationError("fig2_kernel: sigma2 is required");
      if (n != 2 * kernel.points_per_circle) {
        throw ValidationError("fig2_kernel: n must equal 2 * points_per_circle");
      }
      break;
    case ExperimentId::fig3_unknown_sigma:
      if (sigma2_grid.empty()) throw ValidationError("fig3_unknown_sigma: sigma2_grid is empty");
      if (!(threshold_frac > 0.0)) throw ValidationError("fig3_unknown_sigma: threshold_frac must be > 0");
      break;
    case ExperimentId::fig4_linsys_a:
    case ExperimentId::fig5_linsys_b:
      if (sigma2_grid.empty()) throw ValidationError("linsys: sigma2_grid is empty");
      for (double s : sigma2_grid) {
        if (!(s > 0.0)) throw ValidationError("linsys: sigma2 values must be > 0");
      }
      for (double l : h_levels) {
        if (!(l > 0.0)) throw ValidationError("linsys: levels must be positive");
      }
      break;
    case ExperimentId::fig6_shrinkers:
      if (sigma_grid.empty()) throw ValidationError("fig6_shrinkers: sigma_grid is empty");
      for (double s : sigma_grid) {
        if (!(s > 0.0)) throw ValidationError("fig6_shrinkers: sigma values must be > 0");
      }
      for (double l : h_levels) {
        if (!(l > 0.0)) throw ValidationError("fig6_shrinkers: levels must be positive");
      }
      break;
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment_id"] = to_string(id);
  j["n"] = n;
  j["sigma2"] = sigma2 ? json(*sigma2) : json("unknown");
  j["h_levels"] = h_levels;
  j["random_levels"] = random_levels;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir.string();
  j["n_grid"] = n_grid;
  j["sigma2_grid"] = sigma2_grid;
  j["sigma_grid"] = sigma_grid;
  j["snapshot_ns"] = snapshot_ns;
  j["restarts"] = restarts;
  j["K"] = K;
  j["noise"] = noise_name(noise);
  j["threshold_frac"] = threshold_frac;
  j["clip_inverse"] = clip_inverse;
  j["kernel"] = {{"points_per_circle", kernel.points_per_circle},
                 {"radius_inner", kernel.radius_inner},
                 {"radius_outer", kernel.radius_outer},
                 {"coord_noise_sd", kernel.coord_noise_sd},
                 {"bandwidth", kernel.bandwidth}};
  j["recovery"] = recovery_to_json(recovery);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    ExperimentConfig c = defaults(parse_experiment(j.at("experiment_id").get<std::string>()));
    c.n = j.value("n", c.n);
    if (j.contains("sigma2")) {
      const json& s = j.at("sigma2");
      if (s.is_string()) {
        if (s.get<std::string>() != "unknown") {
          throw ValidationError("sigma2 must be a number or \"unknown\"");
        }
        c.sigma2.reset();
      } else {
        c.sigma2 = s.get<double>();
      }
    }
    c.h_levels = j.value("h_levels", c.h_levels);
    c.random_levels = j.value("random_levels", c.random_levels);
    c.seeds = j.value("seeds", c.seeds);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.n_grid = j.value("n_grid", c.n_grid);
    c.sigma2_grid = j.value("sigma2_grid", c.sigma2_grid);
    c.sigma_grid = j.value("sigma_grid", c.sigma_grid);
    c.snapshot_ns = j.value("snapshot_ns", c.snapshot_ns);
    c.restarts = j.value("restarts", c.restarts);
    c.K = j.value("K", c.K);
    if (j.contains("noise")) c.noise = noise_from_name(j.at("noise").get<std::string>());
    c.threshold_frac = j.value("threshold_frac", c.threshold_frac);
    c.clip_inverse = j.value("clip_inverse", c.clip_inverse);
    if (j.contains("kernel")) {
      const json& k = j.at("kernel");
      c.kernel.points_per_circle = k.value("points_per_circle", c.kernel.points_per_circle);
      c.kernel.radius_inner = k.value("radius_inner", c.kernel.radius_inner);
      c.kernel.radius_outer = k.value("radius_outer", c.kernel.radius_outer);
      c.kernel.coord_noise_sd = k.value("coord_noise_sd", c.kernel.coord_noise_sd);
      c.kernel.bandwidth = k.value("bandwidth", c.kernel.bandwidth);
    }
    if (j.contains("recovery")) c.recovery = recovery_from_json(j.at("recovery"));
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = Clock::now();
  Writer writer(config);
  json summary;
  summary["experiment_id"] = to_string(config.id);
  switch (config.id) {
    case ExperimentId::fig1_deconv: run_fig1(config, writer, summary); break;
    case ExperimentId::fig2_kernel: run_fig2(config, writer, summary); break;
    case ExperimentId::fig3_unknown_sigma: run_fig3(config, writer, summary); break;
    case ExperimentId::fig4_linsys_a:
    case ExperimentId::fig5_linsys_b: run_linsys(config, writer, summary); break;
    case ExperimentId::fig6_shrinkers: run_fig6(config, writer, summary); break;
  }
  summary["runtime_seconds"] = seconds_since(t0);

  ExperimentReport report;
  report.files = writer.files();
  const std::string s = stem(config);
  const auto summary_path = config.output_dir / (s + "_summary.json");
  io::write_atomic(summary_path, summary.dump(2) + "\n");

  json manifest;
  manifest["config"] = config.to_json();
  manifest["rng"] = std::string(CounterRng::kName);
  manifest["seed_derivation"] =
      "instance seed = derive_seed(seed, point index); slots: 0 A, 1 noise, 2 recovery, 3 Monte "
      "Carlo, 4 right-hand side";
  json files = json::array();
  for (const auto& f : report.files) files.push_back(f.filename().string());
  manifest["files"] = files;
  const auto manifest_path = config.output_dir / (s + "_manifest.json");
  io::write_atomic(manifest_path, manifest.dump(2) + "\n");

  report.files.push_back(summary_path);
  report.files.push_back(manifest_path);
  report.summary = std::move(summary);
  return report;
}

std::vector<ExperimentReport> run_experiments(const std::vector<ExperimentConfig>& configs,
                                              int workers) {
  std::vector<ExperimentReport> reports(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        reports[i] = run_experiment(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reports;
}

}  // namespace rmtshrink
