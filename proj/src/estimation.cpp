#include "stouf/estimation.hpp"

#include <cmath>

namespace stouf {

double empirical_variance(const RasterSeries& r) {
  const Eigen::Index n = r.values.size();
  if (n < 2) throw ConfigError("need at least two observations for the empirical variance");
  const double k2 = r.values.squaredNorm() / static_cast<double>(n - 1);
  if (k2 == 0.0) throw NumericError("zero variance: raster is identically zero");
  return k2;
}

double temporal_variogram(const RasterSeries& r, int s) {
  const Eigen::Index N = r.n_times();
  if (s < 1 || s >= N) throw ConfigError("temporal lag must satisfy 1 <= s < N");
  const double k2 = empirical_variance(r);
  const Eigen::Index pairs = (N - s) * r.n_positions();
  const double sq =
      (r.values.bottomRows(N - s) - r.values.topRows(N - s)).squaredNorm();
  return sq / (static_cast<double>(pairs) * k2);
}

double spatial_variogram(const RasterSeries& r, int u) {
  const Eigen::Index P = r.n_positions();
  if (u < 1 || u >= P) throw ConfigError("spatial lag must satisfy 1 <= u < P");
  const double k2 = empirical_variance(r);
  const Eigen::Index pairs = r.n_times() * (P - u);
  const double sq = (r.values.rightCols(P - u) - r.values.leftCols(P - u)).squaredNorm();
  return sq / (static_cast<double>(pairs) * k2);
}

EstimatedParams estimate_params(const RasterSeries& r, int tau, int u) {
  EstimatedParams p;
  p.k2_hat = empirical_variance(r);
  p.tau = tau;
  p.u = u;
  const double gt = temporal_variogram(r, tau);
  const double gs = spatial_variogram(r, u);
  if (!(gt > 0.0 && gt < 2.0) || !(gs > 0.0 && gs < 2.0))
    throw NumericError("variogram saturation: increase data or decrease lag");
  p.A_star = -std::log(1.0 - gt / 2.0) / tau;
  p.c_star = -p.A_star * u / std::log(1.0 - gs / 2.0);
  p.lambda_star = p.A_star * std::min(2.0, p.c_star) / (2.0 * p.c_star);
  return p;
}

}  // namespace stouf
