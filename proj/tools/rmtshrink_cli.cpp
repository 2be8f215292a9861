#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/experiments.hpp"
#include "rmtshrink/io.hpp"
#include "rmtshrink/recovery.hpp"
#include "rmtshrink/shrinkage.hpp"
#include "rmtshrink/stieltjes.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rmtshrink;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  fs::path out_dir = ".";
  std::string format = "csv";
};

fs::path resolve(const Globals& g, const fs::path& p) {
  return p.is_absolute() ? p : g.out_dir / p;
}

void write_output(const Globals& g, const fs::path& path, const std::vector<double>& values) {
  const fs::path target = resolve(g, path);
  if (g.format == "json") {
    io::write_atomic(target, json(values).dump() + "\n");
  } else {
    io::write_values(target, values);
  }
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("grid: cannot parse '" + tok + "' in '" + spec + "'");
    }
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw ValidationError("grid must be start:stop:step with step > 0 and stop >= start");
  }
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double x = std::round((parts[0] + i * parts[2]) * 1e12) / 1e12;
    if (x > parts[1] + 1e-9 * parts[2]) break;
    grid.push_back(x);
  }
  return grid;
}

SpectralFunction function_for(const std::string& name, const std::vector<double>& poly) {
  if (name == "custom-poly") {
    if (poly.empty()) throw ValidationError("--h custom-poly needs --poly c0,c1,...");
    return SpectralFunction::polynomial(poly);
  }
  return SpectralFunction::from_name(name);
}

// Clip floor applied to the population spectrum before Monte Carlo shrinkage.
double default_clip(const std::string& h) {
  if (h == "inv") return 0.3;
  if (h == "sqrt") return 0.0;
  return -std::numeric_limits<double>::infinity();
}

struct ShrinkInputs {
  fs::path in;
  fs::path spectrum;
  std::string h = "t";
  std::vector<double> poly;
  double sigma = -1.0;
  int K = 1;
  int restarts = 10;
  std::optional<double> clip;
};

struct ShrinkOutput {
  SpectralDecomposition dec;
  ShrinkageResult result;
  SpectralFunction fn;
};

ShrinkOutput run_shrink(const Globals& g, const ShrinkInputs& in) {
  if (!(in.sigma >= 0.0)) throw ValidationError("--sigma must be >= 0");
  const Matrix a_hat = io::read_matrix(in.in);
  SpectralDecomposition dec = eigh(a_hat);
  SpectralFunction fn = function_for(in.h, in.poly);
  DiscreteSpectrum lambda_t = dec.eigenvalues;
  if (!in.spectrum.empty()) {
    lambda_t = DiscreteSpectrum(io::read_values(in.spectrum));
    if (lambda_t.size() != dec.eigenvalues.size()) {
      throw ValidationError("--spectrum has " + std::to_string(lambda_t.size()) +
                            " values but the matrix is " + std::to_string(a_hat.rows()) + "x" +
                            std::to_string(a_hat.rows()));
    }
  } else {
    lambda_t = recover_spectrum(dec.eigenvalues, in.sigma, in.restarts, derive_seed(g.seed, 1)).t_star;
  }
  const double clip = in.clip.value_or(default_clip(in.h));
  if (std::isfinite(clip)) lambda_t = clip_below(lambda_t, clip);
  ShrinkageResult r = mc_shrink(in.sigma, lambda_t, fn, in.K, derive_seed(g.seed, 2));
  return {std::move(dec), std::move(r), std::move(fn)};
}

json loss_or_null(double (*loss)(const Matrix&, const Matrix&), const Matrix& truth,
                  const Matrix& est) {
  try {
    return loss(truth, est);
  } catch (const ValidationError&) {
    return nullptr;
  }
}

json losses(const Matrix& truth, const Matrix& est) {
  return {{"frobenius", frobenius_loss(est, truth)},
          {"stein", loss_or_null(stein_loss, truth, est)},
          {"divergence", loss_or_null(divergence_loss, truth, est)},
          {"rel_frob", loss_or_null(rel_frob_loss, truth, est)}};
}

void add_shrink_options(CLI::App* cmd, ShrinkInputs& in) {
  cmd->set_help_flag("--help", "Print this help message and exit");
  cmd->add_option("--in", in.in, "Observed symmetric matrix (CSV)")->required();
  cmd->add_option("--spectrum", in.spectrum,
                  "Population eigenvalues, one per line (default: recovered from the input)");
  cmd->add_option("--h", in.h, "Target function")
      ->check(CLI::IsMember({"t", "inv", "sqrt", "square", "pinv", "custom-poly"}));
  cmd->add_option("--poly", in.poly, "Polynomial coefficients c0,c1,... for custom-poly")
      ->delimiter(',');
  cmd->add_option("--sigma", in.sigma, "Noise level sigma")->required();
  cmd->add_option("--K", in.K, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  cmd->add_option("--restarts", in.restarts, "Restarts when recovering the spectrum")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--clip", in.clip,
                  "Lower clip for the population spectrum (default 0.3 for inv, 0 for sqrt)");
}

struct Check {
  std::string name;
  bool ok;
  std::string detail;
};

std::vector<Check> selftest() {
  std::vector<Check> out;
  {
    const Matrix m = sample_goe(120, 11);
    const SpectralDecomposition d = eigh(m);
    const double err =
        (d.eigenvectors * d.values().asDiagonal() * d.eigenvectors.transpose() - m).norm();
    out.push_back({"eigendecomposition (" + to_string(eigen_backend()) + ")", err < 1e-9,
                   "reconstruction error " + io::format_double(err)});
  }
  {
    const DiscreteSpectrum delta0(std::vector<double>{0.0});
    const Complex z(0.3, 0.7);
    const Complex m = solve_m(delta0, 1.0, z);
    const Complex closed = (-z + std::sqrt(z - 2.0) * std::sqrt(z + 2.0)) / 2.0;
    const double err = std::abs(m - closed);
    out.push_back({"semicircle Stieltjes transform", err < 1e-10, "error " + io::format_double(err)});
  }
  {
    const DiscreteSpectrum h = DiscreteSpectrum::balanced({1.0, 4.0, 9.0}, 60);
    const ShrinkageResult r = mc_shrink(1.0, h, SpectralFunction::identity(), 2, 5);
    const double err = std::abs(r.d.sum() - 280.0);
    out.push_back({"Monte Carlo trace identity", err < 1e-9, "error " + io::format_double(err)});
  }
  {
    const int n = 12;
    const DiscreteSpectrum lh = DiscreteSpectrum::balanced({1.0, 3.0}, n);
    const Matrix z = sample_goe(n, 3);
    Vector t(n);
    for (int i = 0; i < n; ++i) t(i) = 0.5 + 0.25 * i;
    const RecoveryGradient g = recovery_gradient(t, z, lh);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      Vector a = t, b = t;
      a(i) += 1e-5;
      b(i) -= 1e-5;
      const double fd = (recovery_objective(a, z, lh) - recovery_objective(b, z, lh)) / 2e-5;
      worst = std::max(worst, std::abs(fd - g.gradient(i)) / std::max(1e-8, std::abs(fd)));
    }
    out.push_back({"recovery gradient vs finite differences", worst < 1e-5,
                   "max relative error " + io::format_double(worst)});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral shrinkage estimators for noisy symmetric matrices"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master random seed");
  app.add_option("--threads", g.threads, "OpenMP threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");
  app.add_option("--format", g.format, "Output file format")->check(CLI::IsMember({"csv", "json"}));

  // deconvolve
  auto* deconv = app.add_subcommand("deconvolve", "Recover population eigenvalues");
  fs::path dc_in, dc_out = "t_star.csv";
  double dc_sigma2 = -1.0;
  int dc_restarts = 10, dc_kreg = 1;
  deconv->add_option("--in", dc_in, "Observed eigenvalues, one per line")->required();
  deconv->add_option("--sigma2", dc_sigma2, "Noise variance sigma^2")->required();
  deconv->add_option("--restarts", dc_restarts)->check(CLI::PositiveNumber);
  deconv->add_option("--k-reg", dc_kreg, "Independent noise copies to average")
      ->check(CLI::PositiveNumber);
  deconv->add_option("--out", dc_out);

  // estimate-noise
  auto* est = app.add_subcommand("estimate-noise", "Scree sweep for an unknown noise level");
  fs::path en_in, en_out = "sweep.csv";
  std::string en_grid = "0.1:2.0:0.05";
  int en_restarts = 10;
  double en_frac = kDefaultThresholdFrac;
  est->add_option("--in", en_in, "Observed eigenvalues, one per line")->required();
  est->add_option("--grid", en_grid, "sigma^2 grid start:stop:step");
  est->add_option("--restarts", en_restarts)->check(CLI::PositiveNumber);
  est->add_option("--threshold-frac", en_frac, "Threshold as a fraction of Var(lambda_hat)");
  est->add_option("--out", en_out);

  // shrink
  auto* shrink = app.add_subcommand("shrink", "Monte Carlo shrinkage diagonal");
  ShrinkInputs sh;
  fs::path sh_out = "d.csv", sh_truth;
  add_shrink_options(shrink, sh);
  shrink->add_option("--out", sh_out);
  shrink->add_option("--truth", sh_truth, "True matrix A (CSV) for loss reporting");

  // denoise
  auto* denoise = app.add_subcommand("denoise", "Estimate h(A) as a full matrix");
  ShrinkInputs dn;
  fs::path dn_out = "estimate.csv", dn_truth;
  add_shrink_options(denoise, dn);
  denoise->add_option("--out", dn_out);
  denoise->add_option("--truth", dn_truth, "True matrix A (CSV) for loss reporting");

  // solve-linsys
  auto* linsys = app.add_subcommand("solve-linsys", "Shrinkage solution of A x = b");
  fs::path ls_in, ls_b, ls_spec, ls_out = "x.csv";
  double ls_sigma = -1.0;
  int ls_restarts = 10;
  std::string ls_mode = "rhs";
  linsys->add_option("--in", ls_in, "Observed symmetric matrix (CSV)")->required();
  linsys->add_option("--b", ls_b, "Right-hand side, one value per line")->required();
  linsys->add_option("--sigma", ls_sigma)->required();
  linsys->add_option("--mode", ls_mode, "rhs (b isotropic) or solution (x isotropic)")
      ->check(CLI::IsMember({"rhs", "solution", "rhs_isotropic", "solution_isotropic"}));
  linsys->add_option("--spectrum", ls_spec,
                     "Population eigenvalues (default: recovered from the input)");
  linsys->add_option("--restarts", ls_restarts)->check(CLI::PositiveNumber);
  linsys->add_option("--out", ls_out);

  // reproduce
  auto* repro = app.add_subcommand("reproduce", "Run one of the experiment figures");
  int rp_figure = 0;
  fs::path rp_config;
  std::optional<int> rp_restarts;
  std::vector<std::uint64_t> rp_seeds;
  std::vector<int> rp_ngrid;
  int rp_workers = 1;
  repro->add_option("--figure", rp_figure, "Figure number 1..6")->check(CLI::Range(1, 6));
  repro->add_option("--config", rp_config, "Replay a manifest or config JSON");
  repro->add_option("--restarts", rp_restarts)->check(CLI::PositiveNumber);
  repro->add_option("--seeds", rp_seeds)->delimiter(',');
  repro->add_option("--n-grid", rp_ngrid, "Override the n grid of figure 1")->delimiter(',');
  repro->add_option("--workers", rp_workers, "Concurrent experiments")->check(CLI::PositiveNumber);

  auto* self = app.add_subcommand("selftest", "Quick numerical sanity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);
    json report;

    if (*deconv) {
      if (!(dc_sigma2 >= 0.0)) throw ValidationError("--sigma2 must be >= 0");
      RecoveryConfig cfg;
      cfg.K_reg = dc_kreg;
      const DiscreteSpectrum lh(io::read_values(dc_in));
      const RecoveryResult r = recover_spectrum(lh, std::sqrt(dc_sigma2), dc_restarts, g.seed, cfg);
      write_output(g, dc_out, r.t_star.values());
      json restarts = json::array();
      for (const auto& d : r.restarts) {
        restarts.push_back({{"seed", d.seed},
                            {"initial_objective", d.initial_objective},
                            {"final_objective", d.final_objective},
                            {"iterations", d.iterations},
                            {"gradient_converged", d.gradient_converged}});
      }
      report = {{"objective", r.objective},
                {"iterations", r.iterations},
                {"sigma_used", r.sigma_used},
                {"degenerate_warnings", r.degenerate_warnings},
                {"restarts", restarts},
                {"out", resolve(g, dc_out).string()}};
    } else if (*est) {
      const DiscreteSpectrum lh(io::read_values(en_in));
      const NoiseSweep s = estimate_noise(lh, parse_grid(en_grid), en_restarts, g.seed, en_frac);
      std::vector<double> chosen(s.grid.size(), 0.0);
      for (std::size_t i = 0; i < s.grid.size(); ++i) {
        if (s.grid[i] <= s.chosen_sigma2 && (i + 1 == s.grid.size() || s.grid[i + 1] > s.chosen_sigma2)) {
          chosen[i] = 1.0;
        }
      }
      const fs::path target = resolve(g, en_out);
      if (g.format == "json") {
        io::write_atomic(target, json({{"sigma2", s.grid}, {"objective", s.objectives}, {"chosen", chosen}}).dump() + "\n");
      } else {
        io::write_series(target, {{"sigma2", s.grid}, {"objective", s.objectives}, {"chosen", chosen}});
      }
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      report = {{"chosen_sigma2", s.chosen_sigma2},
                {"threshold", s.threshold},
                {"warnings", s.warnings},
                {"out", target.string()}};
    } else if (*shrink || *denoise) {
      const bool is_shrink = static_cast<bool>(*shrink);
      const ShrinkInputs& in = is_shrink ? sh : dn;
      const ShrinkOutput o = run_shrink(g, in);
      const Matrix est_m = reconstruct(o.dec, o.result.d);
      const fs::path out = is_shrink ? sh_out : dn_out;
      if (is_shrink) {
        write_output(g, out, std::vector<double>(o.result.d.data(), o.result.d.data() + o.result.d.size()));
      } else {
        io::write_matrix(resolve(g, out), est_m);
      }
      report = {{"h", o.fn.name}, {"K", o.result.K}, {"sigma", o.result.sigma_used},
                {"seeds", o.result.seeds}, {"out", resolve(g, out).string()}};
      const fs::path truth = is_shrink ? sh_truth : dn_truth;
      if (!truth.empty()) {
        const Matrix a = io::read_matrix(truth);
        if (a.rows() != est_m.rows()) throw ValidationError("--truth has the wrong dimension");
        report["losses"] = losses(apply_function(eigh(a), o.fn), est_m);
      }
    } else if (*linsys) {
      if (!(ls_sigma >= 0.0)) throw ValidationError("--sigma must be >= 0");
      const Matrix a_hat = io::read_matrix(ls_in);
      const SpectralDecomposition dec = eigh(a_hat);
      const std::vector<double> bv = io::read_values(ls_b);
      if (static_cast<Eigen::Index>(bv.size()) != a_hat.rows()) {
        throw ValidationError("--b has " + std::to_string(bv.size()) + " values, expected " +
                              std::to_string(a_hat.rows()));
      }
      const DiscreteSpectrum h =
          !ls_spec.empty() ? DiscreteSpectrum(io::read_values(ls_spec))
          : ls_sigma == 0.0
              ? dec.eigenvalues
              : recover_spectrum(dec.eigenvalues, ls_sigma, ls_restarts, derive_seed(g.seed, 1)).t_star;
      const Vector b = Eigen::Map<const Vector>(bv.data(), a_hat.rows());
      const Vector x = solve_noisy_linsys(dec, b, parse_linsys_mode(ls_mode), h, ls_sigma);
      write_output(g, ls_out, std::vector<double>(x.data(), x.data() + x.size()));
      report = {{"mode", ls_mode}, {"out", resolve(g, ls_out).string()}};
    } else if (*repro) {
      ExperimentConfig cfg;
      if (!rp_config.empty()) {
        std::ifstream f(rp_config);
        if (!f) throw ValidationError("cannot open " + rp_config.string());
        json j;
        try {
          j = json::parse(f);
        } catch (const json::exception& e) {
          throw ValidationError(rp_config.string() + ": " + e.what());
        }
        cfg = ExperimentConfig::from_json(j.contains("config") ? j.at("config") : j);
      } else if (rp_figure != 0) {
        cfg = ExperimentConfig::defaults(experiment_for_figure(rp_figure));
      } else {
        throw ValidationError("reproduce needs --figure or --config");
      }
      if (rp_restarts) cfg.restarts = *rp_restarts;
      if (!rp_seeds.empty()) cfg.seeds = rp_seeds;
      if (!rp_ngrid.empty()) cfg.n_grid = rp_ngrid;
      if (rp_config.empty() || app.get_option("--out-dir")->count() > 0) cfg.output_dir = g.out_dir;
      const auto reports = run_experiments({cfg}, rp_workers);
      report = reports.front().summary;
      json files = json::array();
      for (const auto& f : reports.front().files) files.push_back(f.string());
      report["files"] = files;
    } else if (*self) {
      bool all = true;
      for (const auto& c : selftest()) {
        std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        all = all && c.ok;
      }
      return all ? 0 : kExitNumerical;
    }
    std::cout << report.dump(2) << "\n";
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
