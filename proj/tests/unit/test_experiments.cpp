#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "rmtshrink/errors.hpp"
#include "rmtshrink/experiments.hpp"

using namespace rmtshrink;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / ("rmtshrink_exp_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> csv_contents(const ExperimentReport& r) {
  std::map<std::string, std::string> out;
  for (const auto& f : r.files) {
    if (f.extension() == ".csv") out[f.filename().string()] = read_text(f);
  }
  return out;
}

std::vector<ExperimentConfig> small_configs() {
  std::vector<ExperimentConfig> out;

  auto fig1 = ExperimentConfig::defaults(ExperimentId::fig1_deconv);
  fig1.n_grid = {20, 40};
  fig1.snapshot_ns = {40};
  fig1.seeds = {1, 2};
  fig1.restarts = 2;
  out.push_back(fig1);

  auto fig2 = ExperimentConfig::defaults(ExperimentId::fig2_kernel);
  fig2.kernel.points_per_circle = 15;
  fig2.n = 30;
  fig2.restarts = 2;
  out.push_back(fig2);

  auto fig3 = ExperimentConfig::defaults(ExperimentId::fig3_unknown_sigma);
  fig3.n = 30;
  fig3.sigma2_grid = {0.5, 1.5};
  fig3.restarts = 2;
  out.push_back(fig3);

  auto fig5 = ExperimentConfig::defaults(ExperimentId::fig5_linsys_b);
  fig5.n = 30;
  fig5.seeds = {1, 2};
  fig5.sigma2_grid = {0.5, 2.0};
  out.push_back(fig5);

  auto fig6 = ExperimentConfig::defaults(ExperimentId::fig6_shrinkers);
  fig6.n = 30;
  fig6.sigma_grid = {0.5, 1.0};
  fig6.restarts = 2;
  out.push_back(fig6);
  return out;
}

}  // namespace

TEST_CASE("kernel matrix") {
  const KernelRecipe recipe;
  const Matrix pts = sample_circle_points(recipe, 3);
  CHECK(pts.rows() == 200);
  CHECK(pts.cols() == 2);
  const double r_inner = pts.topRows(100).rowwise().norm().mean();
  const double r_outer = pts.bottomRows(100).rowwise().norm().mean();
  CHECK(r_inner == doctest::Approx(0.5).epsilon(0.1));
  CHECK(r_outer == doctest::Approx(1.0).epsilon(0.1));

  const Matrix k = build_kernel_matrix(recipe, 3);
  CHECK(k == k.transpose());
  CHECK((k.diagonal().array() == 1.0).all());
  CHECK(k.minCoeff() > 0.0);
  CHECK(k.maxCoeff() <= 1.0);
  CHECK(eigvalsh_trusted(k).minCoeff() >= -1e-8);
  CHECK(build_kernel_matrix(recipe, 3) == k);

  KernelRecipe bad;
  bad.bandwidth = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("experiment names") {
  for (int f = 1; f <= 6; ++f) {
    const ExperimentId id = experiment_for_figure(f);
    CHECK(parse_experiment(to_string(id)) == id);
  }
  CHECK_THROWS_AS(experiment_for_figure(7), ValidationError);
  CHECK_THROWS_AS(parse_experiment("fig9"), ValidationError);
}

TEST_CASE("config validation and json round trip") {
  for (int f = 1; f <= 6; ++f) {
    const auto c = ExperimentConfig::defaults(experiment_for_figure(f));
    CHECK_NOTHROW(c.validate());
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  auto c = ExperimentConfig::defaults(ExperimentId::fig1_deconv);
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig::defaults(ExperimentId::fig2_kernel);
  c.n = 31;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig::defaults(ExperimentId::fig4_linsys_a);
  c.h_levels = {0.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"experiment_id", "fig1_deconv"}, {"n", "big"}}),
                  ValidationError);
}

TEST_CASE("experiments are reproducible, serially and concurrently") {
  auto configs = small_configs();
  std::vector<std::map<std::string, std::string>> first;
  for (auto& c : configs) {
    c.output_dir = scratch("serial_" + to_string(c.id));
    const ExperimentReport r = run_experiment(c);
    CHECK(r.summary.contains("runtime_seconds"));
    CHECK(fs::exists(c.output_dir / (to_string(c.id) + "_manifest.json")));
    first.push_back(csv_contents(r));
    CHECK_FALSE(first.back().empty());
  }
  for (auto& c : configs) c.output_dir = scratch("parallel_" + to_string(c.id));
  const auto reports = run_experiments(configs, 3);
  REQUIRE(reports.size() == configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CAPTURE(to_string(configs[i].id));
    CHECK(csv_contents(reports[i]) == first[i]);
  }

  const nlohmann::json manifest = nlohmann::json::parse(
      read_text(configs[0].output_dir / (to_string(configs[0].id) + "_manifest.json")));
  auto replay = ExperimentConfig::from_json(manifest["config"]);
  replay.output_dir = scratch("replay");
  CHECK(csv_contents(run_experiment(replay)) == first[0]);
}

TEST_CASE("fig1 output shape") {
  auto c = small_configs()[0];
  c.output_dir = scratch("fig1_shape");
  const ExperimentReport r = run_experiment(c);
  const std::string nmse = read_text(c.output_dir / "fig1_deconv_nmse.csv");
  CHECK(nmse.rfind("n,nmse,nmse_sd\n20,", 0) == 0);
  CHECK(r.summary["nmse"]["40"].get<double>() < 0.5);
  const std::string snaps = read_text(c.output_dir / "fig1_deconv_snapshots.csv");
  CHECK(std::count(snaps.begin(), snaps.end(), '\n') == 41);
}

TEST_CASE("fig6 pipeline tracks the oracle") {
  auto c = ExperimentConfig::defaults(ExperimentId::fig6_shrinkers);
  c.sigma_grid = {0.5, 1.0};
  c.restarts = 3;
  c.output_dir = scratch("fig6_ratio");
  const ExperimentReport r = run_experiment(c);
  for (const std::string target : {"t", "inv", "sqrt"}) {
    CAPTURE(target);
    for (const auto& ratio : r.summary[target]["pipeline_over_oracle"]) {
      CHECK(ratio.get<double>() >= 1.0 - 1e-9);
      CHECK(ratio.get<double>() < 1.1);
    }
  }
}
