#pragma once

#include "stouf/raster.hpp"

namespace stouf {

struct EstimatedParams {
  double A_star = 0.0;
  double c_star = 0.0;
  double lambda_star = 0.0;
  double k2_hat = 0.0;
  double tau = 1.0;  // temporal lag used
  double u = 1.0;    // spatial lag used (grid units)
};

// (1/(N*P - 1)) * sum Z^2, the zero-mean variance convention.
double empirical_variance(const RasterSeries& r);

// Normalized variogram over same-position pairs at time distance s.
double temporal_variogram(const RasterSeries& r, int s);

// Normalized variogram over same-time pairs at spatial distance u grid units.
double spatial_variogram(const RasterSeries& r, int u);

// Moment estimators for A and c from the two variograms, plus the plug-in
// decay rate lambda = A*min(2,c)/(2c) of the dependence coefficients.
EstimatedParams estimate_params(const RasterSeries& r, int tau = 1, int u = 1);

}  // namespace stouf
