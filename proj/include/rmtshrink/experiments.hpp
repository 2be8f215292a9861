#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtshrink/random.hpp"
#include "rmtshrink/recovery.hpp"
#include "rmtshrink/rmt_core.hpp"

namespace rmtshrink {

enum class ExperimentId {
  fig1_deconv,
  fig2_kernel,
  fig3_unknown_sigma,
  fig4_linsys_a,
  fig5_linsys_b,
  fig6_shrinkers,
};

ExperimentId parse_experiment(const std::string& name);
/// Figure number 1..6.
ExperimentId experiment_for_figure(int figure);
std::string to_string(ExperimentId id);

/// Two noisy circles sampled for a Gaussian-kernel connectivity matrix.
struct KernelRecipe {
  int points_per_circle = 100;
  double radius_inner = 0.5;
  double radius_outer = 1.0;
  double coord_noise_sd = 0.05;
  double bandwidth = 0.1;

  void validate() const;
};

/// Points as rows (2 columns), inner circle first.
Matrix sample_circle_points(const KernelRecipe& recipe, std::uint64_t seed);
Matrix build_kernel_matrix(const KernelRecipe& recipe, std::uint64_t seed);

struct ExperimentConfig {
  ExperimentId id = ExperimentId::fig1_deconv;
  int n = 200;
  std::optional<double> sigma2;  // nullopt: unknown, estimated by the sweep
  /// Atom locations of H (uniform weights).
  std::vector<double> h_levels;
  /// Draw diagonal entries of A uniformly from h_levels instead of equal blocks.
  bool random_levels = false;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = ".";

  std::vector<int> n_grid;            // fig1
  std::vector<double> sigma2_grid;    // fig3 sweep, fig4/5 noise levels
  std::vector<double> sigma_grid;     // fig6
  std::vector<int> snapshot_ns;       // fig1 recovered-eigenvalue snapshots
  int restarts = 10;
  int K = 1;
  NoiseKind noise = NoiseKind::gaussian_orthogonal();
  double threshold_frac = kDefaultThresholdFrac;
  double clip_inverse = 0.3;
  KernelRecipe kernel;
  RecoveryConfig recovery;

  /// Desk-scale defaults for each figure.
  static ExperimentConfig defaults(ExperimentId id);
  void validate() const;
  nlohmann::json to_json() const;
  /// Inverse of to_json; a manifest's "config" entry replays the run.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct ExperimentReport {
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Runs one experiment and writes `<id>_*.csv`, `<id>_summary.json` and
/// `<id>_manifest.json` into config.output_dir. CSV contents depend only on
/// the config; runtimes go to the summary only.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Runs independent experiments on up to `workers` threads. Reports are
/// returned in config order.
std::vector<ExperimentReport> run_experiments(const std::vector<ExperimentConfig>& configs,
                                              int workers);

}  // namespace rmtshrink
