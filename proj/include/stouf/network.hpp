#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stouf/common.hpp"
#include "stouf/rng.hpp"

namespace stouf {

// Feed-forward net: ReLU hidden layers, linear scalar output, no output bias.
struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;  // n_1..n_l

  int n_hidden_layers() const { return static_cast<int>(hidden.size()); }
  Eigen::Index param_count() const;
  std::string to_string() const;  // "w^l" when widths are uniform
  void validate() const;

  // "w^l", e.g. "10^2" = two hidden layers of width 10.
  static Architecture parse(const std::string& s, int input_dim);
};

// Flat layout: W1 (row-major), b1, W2, b2, ..., Wl, bl, W_{l+1}.
struct UnpackedParams {
  std::vector<Eigen::MatrixXd> W;  // l+1 matrices, W[i] is n_{i+1} x n_i
  std::vector<Eigen::VectorXd> b;  // l vectors (hidden layers only)
};

UnpackedParams unpack(const Architecture& arch, const Eigen::VectorXd& theta);
Eigen::VectorXd pack(const Architecture& arch, const UnpackedParams& p);

double forward(const Architecture& arch, const Eigen::VectorXd& theta,
               const Eigen::VectorXd& x);

// Gradient of the truncated absolute loss min(|h(x)-y|, epsilon) w.r.t. theta.
// Subgradient 0 at the loss kinks and at ReLU kinks.
Eigen::VectorXd backward(const Architecture& arch, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double y, double epsilon);

// Largest singular value by power iteration (deterministic start vector).
double spectral_norm(const Eigen::MatrixXd& m, double tol = 1e-8, int max_iter = 200);

// Product of spectral norms over all weight matrices.
double lipschitz_bound(const Architecture& arch, const Eigen::VectorXd& theta);

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus_inv(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Diagonal Gaussian over parameters; variances kappa = softplus(raw_kappa)^2
// stay positive under unconstrained updates.
struct GaussianPosterior {
  Eigen::VectorXd mu;
  Eigen::VectorXd raw_kappa;

  Eigen::VectorXd kappa() const;
  static GaussianPosterior initial(Eigen::Index d);  // mu = 0, kappa = 1/4
};

struct ReferenceDistribution {
  double s = 1.0;  // isotropic variance, zero mean
};

// KL(rho || pi) = 1/2 sum(log(s/kappa) - 1 + kappa/s + mu^2/s)
double kl(const GaussianPosterior& rho, const ReferenceDistribution& pi);

struct ThetaDraw {
  Eigen::VectorXd theta;
  Eigen::VectorXd eps;
};

// theta = mu + sqrt(kappa) .* eps, eps returned for pathwise gradients.
ThetaDraw sample_theta(const GaussianPosterior& rho, RandomStream& rng);

// Monte Carlo mean of lipschitz_bound over n draws theta ~ N(0, s I).
double mc_lip_reference(const Architecture& arch, const ReferenceDistribution& pi, int n,
                        RandomStream& rng);

}  // namespace stouf
