#include "stouf/stou_sim.hpp"

#include <algorithm>
#include <cmath>

namespace stouf {

void StouModel::validate() const {
  if (!(A > 0.0)) throw ConfigError("A must be positive");
  if (!(c > 0.0)) throw ConfigError("c must be positive");
  basis.validate();
}

void SimGrid::validate() const {
  if (N < 1 || P < 1) throw ConfigError("simulation grid needs N >= 1 and P >= 1");
  if (!(dt > 0.0) || !(dx > 0.0)) throw ConfigError("dt and dx must be positive");
  if (refine < 1) throw ConfigError("refine must be >= 1");
  if (!(trunc_tol > 0.0 && trunc_tol < 1.0)) throw ConfigError("trunc_tol must be in (0,1)");
}

// Center-rule weights: exp(-A u) at the cell center, zero when the center
// falls outside the cone. A later observation sees the same cell at depth
// u + tau with the same membership, so the lag-tau covariance ratio is
// exactly exp(-A tau) at any refinement. A single global rescale then pins
// the discrete second moment to the exact cone integral c/(2A^2).
ConeKernel build_cone_kernel(const StouModel& model, const SimGrid& grid) {
  model.validate();
  grid.validate();
  ConeKernel k;
  k.h = grid.dt / grid.refine;
  k.hx = grid.dx / grid.refine;
  k.T = static_cast<int>(std::ceil(std::log(1.0 / grid.trunc_tol) / (model.A * k.h)));
  k.M = static_cast<int>(std::ceil(model.c * (k.T + 0.5) * k.h / k.hx + 0.5));
  k.w.setZero(k.T + 1, 2 * k.M + 1);
  for (int n = 0; n <= k.T; ++n) {
    const double u = n * k.h;
    for (int m = -k.M; m <= k.M; ++m)
      if (std::abs(m) * k.hx <= model.c * u || m == 0) k.w(n, m + k.M) = std::exp(-model.A * u);
  }
  const double target = model.c / (2.0 * model.A * model.A);
  k.w *= std::sqrt(target / k.second_moment());
  return k;
}

double theoretical_variance(const StouModel& model) {
  model.validate();
  return variance_rate(model.basis) * model.c / (2.0 * model.A * model.A);
}

double discrete_variance(const StouModel& model, const SimGrid& grid) {
  return variance_rate(model.basis) * build_cone_kernel(model, grid).second_moment();
}

RasterSeries simulate(const StouModel& model, const SimGrid& grid) {
  const ConeKernel k = build_cone_kernel(model, grid);
  const int refine = grid.refine;
  const Eigen::Index width = 2 * k.M + static_cast<Eigen::Index>(grid.P - 1) * refine + 1;
  const Eigen::Index window_rows = k.T + 1;

  const double window_mb =
      static_cast<double>(window_rows) * static_cast<double>(width) * 8.0 / (1024.0 * 1024.0);
  if (window_mb > grid.max_window_mb)
    throw ConfigError("simulation window of " + format_double(window_mb) +
                      " MB exceeds max_window_mb");

  RandomStream rng(derive_seed(grid.seed, stage::sim));
  const double cell_area = k.h * k.hx;

  RowMatrixXd window(window_rows, width);
  auto fill_row = [&](Eigen::Index fine_row) {
    const Eigen::Index r = fine_row % window_rows;
    for (Eigen::Index q = 0; q < width; ++q)
      window(r, q) = sample_cell(model.basis, cell_area, rng);
  };

  // Prime the window with the effective past of the first output row.
  for (Eigen::Index fk = 0; fk < k.T; ++fk) fill_row(fk);

  RasterSeries out;
  out.values.resize(grid.N, grid.P);
  out.t0 = 0.0;
  out.h_t = grid.dt;
  out.positions.resize(grid.P);
  for (Eigen::Index j = 0; j < grid.P; ++j) out.positions[j] = static_cast<double>(j) * grid.dx;
  out.name = "stou-sim";

  // Fine row index of the coarse output row i is k.T + i*refine; the window
  // always holds the last T+1 fine rows.
  for (Eigen::Index i = 0; i < grid.N; ++i) {
    const Eigen::Index fi = k.T + i * refine;
    const Eigen::Index first_new = (i == 0) ? fi : fi - refine + 1;
    for (Eigen::Index fk = first_new; fk <= fi; ++fk) fill_row(fk);
    for (Eigen::Index j = 0; j < grid.P; ++j) {
      const Eigen::Index q0 = j * refine;  // leftmost window column of the cone row
      double acc = 0.0;
      for (int n = 0; n <= k.T; ++n) {
        const Eigen::Index r = (fi - n) % window_rows;
        acc += k.w.row(n).dot(window.row(r).segment(q0, 2 * k.M + 1));
      }
      out.values(i, j) = acc;
    }
  }
  return out;
}

}  // namespace stouf
