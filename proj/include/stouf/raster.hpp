#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stouf/common.hpp"

namespace stouf {

// A regularly sampled space-time value grid. Row i holds the field at time
// t0 + (i+1)*h_t; column j holds spatial position positions[j]. Immutable
// after construction by convention; safe to share read-only.
struct RasterSeries {
  Eigen::MatrixXd values;  // N x P
  double t0 = 0.0;
  double h_t = 1.0;
  std::vector<double> positions;
  std::string name;

  Eigen::Index n_times() const { return values.rows(); }
  Eigen::Index n_positions() const { return values.cols(); }
  double time_of_row(Eigen::Index i) const { return t0 + h_t * static_cast<double>(i + 1); }

  void validate() const;  // throws ConfigError on any invariant violation
};

enum class DetrendMode { none, per_position_mean, global_mean };

DetrendMode detrend_mode_from_string(const std::string& s);
std::string to_string(DetrendMode mode);

struct DetrendInfo {
  DetrendMode mode = DetrendMode::none;
  Eigen::VectorXd removed;  // length P, the subtracted per-position estimate
};

RasterSeries load_raster(const std::string& path);
void save_raster(const RasterSeries& r, const std::string& path);

std::pair<RasterSeries, DetrendInfo> detrend(const RasterSeries& r, DetrendMode mode);

}  // namespace stouf
