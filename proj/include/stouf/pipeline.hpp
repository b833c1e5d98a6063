#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stouf/embedding.hpp"
#include "stouf/estimation.hpp"
#include "stouf/forecast.hpp"
#include "stouf/metrics.hpp"
#include "stouf/stou_sim.hpp"
#include "stouf/training.hpp"

namespace stouf {

struct PipelineConfig {
  // Data source: exactly one of data_file or sim.
  std::string data_file;
  bool simulate_data = false;
  StouModel sim_model;
  SimGrid sim_grid;

  DetrendMode detrend_mode = DetrendMode::per_position_mean;
  int est_tau = 1;  // temporal variogram lag, in sampling steps
  int est_u = 1;    // spatial variogram lag, in grid units

  int p = 1;
  double epsilon = 3.0;
  double delta = 0.025;
  Eigen::Index n_test = 18;
  int force_a = 0;

  std::vector<std::string> archs = {"10^2"};
  // Reference-precision grid; realized reference variance is 1/s.
  std::vector<double> s_grid = {10, 30, 50, 70, 90, 110, 130, 150, 170, 190, 210};
  TrainConfig train;
  int sweep_epochs = 0;  // 0 = full epochs during the grid search

  int J = 100;
  int H = -1;  // -1: span the whole test set
  std::uint64_t seed = 0;
  std::string out = "out";

  void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);

struct GridSearchResult {
  double s_star = 0.0;                 // chosen precision (variance 1/s_star)
  std::vector<double> grid;            // the searched precisions
  std::vector<double> val_crps;        // position-averaged CRPS per grid point
  std::vector<PositionModel> models;   // trained at s_star, one per position
  std::vector<TrainReport> reports;    // per position, at s_star
};

// Full grid search of Algorithm 2 runs over the reference precisions:
// train every position at each s, score a J-member validation ensemble at
// H = 0, pick the precision with minimal position-averaged CRPS (ties break
// toward smaller s).
GridSearchResult validate_reference(const FeatureBundle& features, const Architecture& arch,
                                    const std::vector<double>& s_grid, const TrainConfig& cfg,
                                    int sweep_epochs, int J, std::uint64_t master_seed);

struct ArchSummary {
  std::string arch;
  double s_star = 0.0;
  std::vector<double> grid_crps;
  double target_final = 0.0;          // averaged over positions
  double pac_bound_mean = 0.0;
  bool any_vacuous = false;
  double val_crps = 0.0;
  double val_rmse = 0.0;
  double test_crps = 0.0;
  double test_rmse = 0.0;
  double crps_ratio = 0.0;  // test / validation
  int horizons = 0;
  std::string posterior_dir;
  std::string test_ensemble;
  std::string test_report;
};

struct RunManifest {
  EstimatedParams estimates;
  double raw_variance = 0.0;
  EmbeddingPlan plan;
  std::string features_dir;
  std::string raster_file;
  std::vector<ArchSummary> archs;
};

RunManifest run_pipeline(const PipelineConfig& cfg);

void save_manifest(const std::string& path, const PipelineConfig& cfg,
                   const RunManifest& manifest);

}  // namespace stouf
