#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stouf/embedding.hpp"
#include "stouf/network.hpp"

namespace stouf {

struct EnsembleForecast {
  // members[r] is J x (H+1): member j, horizon h, for position positions[r].
  std::vector<Eigen::MatrixXd> members;
  Eigen::MatrixXd observations;  // (H+1) x R
  std::vector<Eigen::Index> positions;
  Eigen::Index start = 0;  // example index i; horizon h targets index i+h
  int a = 0;
  std::vector<double> times;  // time stamps of the targeted rows

  int J() const { return members.empty() ? 0 : static_cast<int>(members.front().rows()); }
  int H() const { return members.empty() ? -1 : static_cast<int>(members.front().cols()) - 1; }
  void validate() const;
};

struct PositionModel {
  Architecture arch;
  GaussianPosterior rho;
};

// Full feature history for one position (inputs/targets for indices 1..N/a),
// so forecasts can address any example index directly.
struct PositionHistory {
  Eigen::Index position = 0;
  Eigen::MatrixXd inputs;   // floor(N/a) x D, row k = example index k+1
  Eigen::VectorXd targets;
  std::vector<double> times;
};

PositionHistory concat_history(const PositionFeatures& pf, const EmbeddingPlan& plan,
                               const RasterSeries* raster = nullptr);

// Algorithm: per position and member, draw theta once and evaluate it on the
// inputs at indices start..start+H.
EnsembleForecast generate_ensemble(const std::vector<PositionModel>& models,
                                   const std::vector<PositionHistory>& histories,
                                   Eigen::Index start, int H, int J, RandomStream& rng);

// Grid points inside the intersection of the future cones of the input
// coordinates of example i at position x_star. Returned as (time index, pos)
// pairs on the raster grid, time index in [i*a, i*a + horizon_steps].
std::vector<std::pair<Eigen::Index, Eigen::Index>> causal_footprint(
    Eigen::Index i, const EmbeddingPlan& plan, Eigen::Index x_star, Eigen::Index P,
    Eigen::Index horizon_steps);

void save_ensemble(const std::string& path, const EnsembleForecast& ef);
EnsembleForecast load_ensemble(const std::string& path);

}  // namespace stouf
