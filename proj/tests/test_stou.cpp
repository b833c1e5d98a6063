#include <doctest.h>

#include <cmath>

#include "stouf/estimation.hpp"
#include "stouf/stou_sim.hpp"

using namespace stouf;

namespace {

// Simpson quadrature of the squared-kernel cone integral
// int_0^U exp(-2Au) * 2cu du, the independent oracle for the closed forms.
double quad_second_moment(double A, double c, double U, int n = 20000) {
  auto f = [&](double u) { return std::exp(-2.0 * A * u) * 2.0 * c * u; };
  const double h = U / n;
  double s = f(0.0) + f(U);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("theoretical variance closed form") {
  StouModel m;
  m.A = 1.0;
  m.c = 2.0;
  m.basis.sigma2 = 1.0;
  CHECK(theoretical_variance(m) == doctest::Approx(1.0));
  // quadrature cross-check of the cone integral
  CHECK(quad_second_moment(1.0, 2.0, 40.0) == doctest::Approx(1.0).epsilon(1e-9));

  StouModel k = m;
  k.basis.sigma2 = 3.0;
  CHECK(theoretical_variance(k) == doctest::Approx(3.0));
  StouModel a2 = m;
  a2.A = 2.0;
  CHECK(theoretical_variance(a2) == doctest::Approx(0.25));
}

TEST_CASE("cone kernel geometry, normalization, and exact temporal ratios") {
  StouModel m;
  m.A = 1.0;
  m.c = 2.0;
  SimGrid g;
  g.N = 1;
  g.P = 1;
  g.refine = 4;
  g.trunc_tol = 1e-6;
  const auto k = build_cone_kernel(m, g);

  // independent reconstruction: exp(-A u) at centers inside |v| <= c u,
  // rescaled so the discrete second moment equals the exact cone integral
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(k.T + 1, 2 * k.M + 1);
  for (int n = 0; n <= k.T; ++n)
    for (int q = -k.M; q <= k.M; ++q)
      if (std::abs(q) * k.hx <= m.c * n * k.h)
        raw(n, q + k.M) = std::exp(-m.A * n * k.h);
  raw *= std::sqrt(theoretical_variance(m) / (raw.squaredNorm() * k.h * k.hx));
  CHECK((k.w - raw).cwiseAbs().maxCoeff() < 1e-12);

  // second moment pinned to c/(2A^2), which quadrature confirms independently
  CHECK(k.second_moment() == doctest::Approx(m.c / (2.0 * m.A * m.A)).epsilon(1e-12));
  CHECK(quad_second_moment(m.A, m.c, 40.0) == doctest::Approx(k.second_moment()).epsilon(1e-9));
  CHECK(discrete_variance(m, g) == doctest::Approx(theoretical_variance(m)).epsilon(1e-12));

  // lag-tau covariance ratio is exactly exp(-A tau) on the shared support
  for (int r : {g.refine, 2 * g.refine}) {
    double cov = 0.0, var_shared = 0.0;
    for (int n = 0; n + r <= k.T; ++n) {
      cov += k.w.row(n + r).dot(k.w.row(n));
      var_shared += k.w.row(n).squaredNorm();
    }
    CHECK(cov == doctest::Approx(std::exp(-m.A * r * k.h) * var_shared).epsilon(1e-12));
  }
}

TEST_CASE("refinement tightens the spatial correlation error") {
  StouModel m;
  m.A = 0.7;
  m.c = 1.3;
  SimGrid g;
  g.N = 1;
  g.P = 2;
  g.trunc_tol = 1e-6;
  // discrete correlation of two observation points dx apart vs exp(-A dx / c)
  auto corr_err = [&](int refine) {
    g.refine = refine;
    const auto k = build_cone_kernel(m, g);
    double cov = 0.0;
    for (int n = 0; n <= k.T; ++n)
      cov += k.w.row(n).head(2 * k.M + 1 - refine).dot(k.w.row(n).tail(2 * k.M + 1 - refine));
    const double rho = cov * k.h * k.hx / k.second_moment();
    return std::abs(rho - std::exp(-m.A * g.dx / m.c));
  };
  const double e2 = corr_err(2);
  const double e8 = corr_err(8);
  CHECK(e8 <= e2);
  CHECK(e8 < 0.02);
}

TEST_CASE("simulation is reproducible bit for bit") {
  StouModel m;
  m.A = 1.0;
  m.c = 1.0;
  SimGrid g;
  g.N = 50;
  g.P = 3;
  g.refine = 2;
  g.trunc_tol = 1e-4;
  g.seed = 77;
  auto a = simulate(m, g);
  auto b = simulate(m, g);
  CHECK(a.values == b.values);
  g.seed = 78;
  auto c = simulate(m, g);
  CHECK(a.values != c.values);
}

TEST_CASE("window memory limit is enforced") {
  StouModel m;
  m.A = 0.01;  // deep cone
  SimGrid g;
  g.N = 10;
  g.P = 100;
  g.refine = 8;
  g.max_window_mb = 0.001;
  CHECK_THROWS_WITH_AS(simulate(m, g), doctest::Contains("max_window_mb"), ConfigError);
}

TEST_CASE("simulated moments match the model") {
  StouModel m;
  m.A = 1.0;
  m.c = 2.0;
  m.basis.sigma2 = 1.0;
  SimGrid g;
  g.N = 30000;
  g.P = 4;
  g.refine = 2;
  g.trunc_tol = 1e-5;
  g.seed = 2024;
  const auto r = simulate(m, g);

  const double tv = theoretical_variance(m);
  const double v = empirical_variance(r);
  CHECK(v == doctest::Approx(tv).epsilon(0.07));
  CHECK(std::abs(r.values.mean()) < 4.0 * std::sqrt(tv / (g.N / 2.0)));

  // gamma_T(s) = 2(1 - exp(-A s)), gamma_S(u) = 2(1 - exp(-A u / c))
  for (int s = 1; s <= 3; ++s)
    CHECK(temporal_variogram(r, s) ==
          doctest::Approx(2.0 * (1.0 - std::exp(-m.A * s))).epsilon(0.08));
  CHECK(spatial_variogram(r, 1) ==
        doctest::Approx(2.0 * (1.0 - std::exp(-m.A / m.c))).epsilon(0.08));
}

TEST_CASE("invalid model and grid parameters") {
  StouModel m;
  m.A = 0.0;
  SimGrid g;
  g.N = 1;
  g.P = 1;
  CHECK_THROWS_AS(simulate(m, g), ConfigError);
  m.A = 1.0;
  g.refine = 0;
  CHECK_THROWS_AS(simulate(m, g), ConfigError);
  g.refine = 1;
  g.trunc_tol = 0.0;
  CHECK_THROWS_AS(simulate(m, g), ConfigError);
}
