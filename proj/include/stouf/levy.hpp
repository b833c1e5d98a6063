#pragma once

#include <cmath>
#include <string>

#include "stouf/common.hpp"
#include "stouf/rng.hpp"

namespace stouf {

enum class LevyKind { gaussian, nig };

LevyKind levy_kind_from_string(const std::string& s);
std::string to_string(LevyKind kind);

// Homogeneous Levy basis with mean zero per unit area. The NIG location is
// derived from (alpha, beta, delta_rate) so the zero-mean condition holds by
// construction.
struct LevyBasisSpec {
  LevyKind kind = LevyKind::gaussian;
  double sigma2 = 1.0;  // Gaussian: variance per unit area

  double alpha = 1.0;  // NIG tail steepness
  double beta = 0.0;   // NIG asymmetry, |beta| < alpha
  double delta_rate = 1.0;  // NIG scale per unit area

  double gamma_nig() const { return std::sqrt(alpha * alpha - beta * beta); }
  double location_rate() const { return -delta_rate * beta / gamma_nig(); }

  void validate() const;
};

// Variance of the basis value over a unit-area cell.
double variance_rate(const LevyBasisSpec& spec);

// One draw of the basis value over a cell of the given area.
double sample_cell(const LevyBasisSpec& spec, double area, RandomStream& rng);

// Inverse-Gaussian draw (Michael-Schucany-Haas transformation).
double sample_inverse_gaussian(double mean, double shape, RandomStream& rng);

}  // namespace stouf
