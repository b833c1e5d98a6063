#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stouf/forecast.hpp"
#include "stouf/rng.hpp"

namespace stouf {

// Ensemble CRPS: mean|x_j - y| - (1/(2J^2)) sum|x_j - x_k|, O(J log J).
double crps(const Eigen::VectorXd& members, double y);

// sqrt of the mean over horizons and members of the squared error.
double rmse(const EnsembleForecast& ef, Eigen::Index position_index);

// Randomized PIT: (#{x_j < y} + U (1 + #{x_j = y})) / (J + 1).
double pit(const Eigen::VectorXd& members, double y, RandomStream& rng);

// Linear-interpolation empirical quantile (q in [0,1]).
double interp_quantile(Eigen::VectorXd values, double q);

struct EvaluationReport {
  std::vector<Eigen::Index> positions;
  Eigen::MatrixXd crps_table;        // (H+1) x R
  std::vector<double> crps_per_pos;  // horizon-averaged
  double crps_mean = 0.0;            // averaged over horizons and positions
  std::vector<double> rmse_per_pos;
  double rmse_mean = 0.0;
  Eigen::MatrixXd pit_values;        // (H+1) x R
  std::vector<int> pit_histogram;    // B bins over [0,1]
  std::vector<double> coverage_levels;    // percents, e.g. 10..90, 95
  std::vector<double> coverage_observed; // fractions in [0,1]
};

EvaluationReport evaluate(const EnsembleForecast& ef, std::uint64_t pit_seed,
                          int pit_bins = 10,
                          const std::vector<double>& levels = {10, 20, 30, 40, 50, 60, 70,
                                                               80, 90, 95});

void save_report(const std::string& path, const EvaluationReport& report);

// Plot-data CSVs: PIT bin counts, coverage table, per-horizon quantile bands.
void save_plot_data(const std::string& dir, const EnsembleForecast& ef,
                    const EvaluationReport& report);

}  // namespace stouf
