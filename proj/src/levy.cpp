#include "stouf/levy.hpp"

namespace stouf {

LevyKind levy_kind_from_string(const std::string& s) {
  if (s == "gaussian" || s == "Gaussian") return LevyKind::gaussian;
  if (s == "nig" || s == "NIG") return LevyKind::nig;
  throw ConfigError("unknown levy.kind: " + s);
}

std::string to_string(LevyKind kind) {
  return kind == LevyKind::gaussian ? "gaussian" : "nig";
}

void LevyBasisSpec::validate() const {
  if (kind == LevyKind::gaussian) {
    if (!(sigma2 > 0.0)) throw ConfigError("levy.sigma2 must be positive");
  } else {
    if (!(alpha > std::abs(beta))) throw ConfigError("NIG requires alpha > |beta|");
    if (!(delta_rate > 0.0)) throw ConfigError("levy.delta must be positive");
  }
}

double variance_rate(const LevyBasisSpec& spec) {
  spec.validate();
  if (spec.kind == LevyKind::gaussian) return spec.sigma2;
  const double g = spec.gamma_nig();
  return spec.delta_rate * spec.alpha * spec.alpha / (g * g * g);
}

double sample_inverse_gaussian(double mean, double shape, RandomStream& rng) {
  const double n = rng.gaussian();
  const double y = n * n;
  const double x = mean + mean * mean * y / (2.0 * shape) -
                   (mean / (2.0 * shape)) * std::sqrt(4.0 * mean * shape * y + mean * mean * y * y);
  if (rng.uniform() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

double sample_cell(const LevyBasisSpec& spec, double area, RandomStream& rng) {
  if (!(area > 0.0)) throw ConfigError("cell area must be positive");
  spec.validate();
  if (spec.kind == LevyKind::gaussian) {
    return std::sqrt(spec.sigma2 * area) * rng.gaussian();
  }
  // NIG(alpha, beta, mu_B, delta_B) via inverse-Gaussian mixing.
  const double delta_b = spec.delta_rate * area;
  const double mu_b = spec.location_rate() * area;
  const double g = spec.gamma_nig();
  const double z = sample_inverse_gaussian(delta_b / g, delta_b * delta_b, rng);
  return mu_b + spec.beta * z + std::sqrt(z) * rng.gaussian();
}

}  // namespace stouf
