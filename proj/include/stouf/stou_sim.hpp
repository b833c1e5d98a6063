#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "stouf/levy.hpp"
#include "stouf/raster.hpp"

namespace stouf {

// Data-generating law: exponentially weighted integral of a Levy basis over
// the cone-shaped past region with apex speed c and decay rate A.
struct StouModel {
  double A = 1.0;  // mean-reverting rate, 1/time
  double c = 1.0;  // speed of information propagation, space/time
  LevyBasisSpec basis;

  void validate() const;
};

struct SimGrid {
  Eigen::Index N = 0;       // time steps
  Eigen::Index P = 0;       // positions
  double dt = 1.0;          // = h_t
  double dx = 1.0;          // grid spacing
  int refine = 4;           // sub-cells per grid cell per axis
  double trunc_tol = 1e-6;  // kernel truncation tolerance
  std::uint64_t seed = 0;
  double max_window_mb = 1024.0;

  void validate() const;
};

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Discretized cone kernel on the fine grid. w(n, M+m) is the weight applied
// to the basis value of the fine cell at temporal lag n*h and spatial offset
// m*hx from the target point. Each weight is the root mean square of the
// kernel exp(-A(t-s)) over the intersection of the cell with the cone, so the
// simulated field matches the continuous first and second moments exactly up
// to the truncation tolerance.
struct ConeKernel {
  int T = 0;   // temporal truncation depth in fine steps
  int M = 0;   // spatial half-width in fine cells
  double h = 0.0;   // fine temporal step
  double hx = 0.0;  // fine spatial step
  RowMatrixXd w;    // (T+1) x (2M+1)

  // Integral of the squared kernel over the truncated cone; multiplied by
  // the basis variance rate this is the exact variance of the output field.
  double second_moment() const { return w.squaredNorm() * h * hx; }
};

ConeKernel build_cone_kernel(const StouModel& model, const SimGrid& grid);

RasterSeries simulate(const StouModel& model, const SimGrid& grid);

// Var(basis per unit area) * c / (2 A^2), the cone integral in closed form.
double theoretical_variance(const StouModel& model);

// Variance of the discretized field in distribution (no sampling noise).
double discrete_variance(const StouModel& model, const SimGrid& grid);

}  // namespace stouf
