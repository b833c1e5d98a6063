#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stouf/embedding.hpp"
#include "stouf/network.hpp"

namespace stouf {

struct TrainConfig {
  double epsilon = 3.0;
  double delta = 0.025;
  double eta = 1e-3;
  Eigen::Index batch = 0;  // 0 = full batch
  int epochs = 30;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
  int bound_mc_draws = 100;   // posterior draws when reporting rho*[r]
  int mc_lip_draws = 1000;    // reference draws for the Lipschitz constant

  void validate() const;
};

struct TrainReport {
  double initial_target = 0.0;
  double final_target = 0.0;
  std::vector<double> target_curve;  // full-train-set target after each epoch
  double kl_value = 0.0;
  double mc_lip = 0.0;
  double pac_bound_value = 0.0;
  double rho_r = 0.0;  // MC average empirical risk under the posterior
  double wallclock_s = 0.0;
  bool vacuous = false;  // pac_bound >= epsilon
};

double truncated_loss(double x, double y, double epsilon);

// r_hat + (KL + sqrt((2 KL + 1)(mc_lip * D + 1))) / sqrt(m)
double target_value(double r_hat, double kl_value, double mc_lip, int D, Eigen::Index m);

// Mean truncated loss of a single deterministic parameter draw over a set.
double empirical_risk(const Architecture& arch, const Eigen::VectorXd& theta,
                      const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                      double epsilon);

struct AdamState {
  Eigen::VectorXd m1, m2;
  long t = 0;

  static AdamState initial(Eigen::Index d);
};

struct TrainState {
  Architecture arch;
  GaussianPosterior rho;
  ReferenceDistribution pi;
  AdamState adam;
  double mc_lip = 0.0;
  Eigen::Index m_total = 0;  // training-set size, fixed in the penalty
  TrainConfig cfg;
};

// Batch risk at frozen reparameterization noise plus the KL/Lipschitz
// penalty, as a function of (mu, raw_kappa).
double frozen_objective(const Architecture& arch, const GaussianPosterior& rho,
                        const ReferenceDistribution& pi, double mc_lip,
                        Eigen::Index m_total, double epsilon, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets, const Eigen::VectorXd& eps);

// Exact pathwise gradient of frozen_objective w.r.t. (mu, raw_kappa),
// concatenated as [d/d mu; d/d raw_kappa].
Eigen::VectorXd objective_gradient(const Architecture& arch, const GaussianPosterior& rho,
                                   const ReferenceDistribution& pi, double mc_lip,
                                   Eigen::Index m_total, double epsilon,
                                   const Eigen::MatrixXd& inputs,
                                   const Eigen::VectorXd& targets, const ThetaDraw& draw);

// One Adam update from a single posterior draw over a chronological batch.
void step(TrainState& st, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
          RandomStream& rng);

std::pair<GaussianPosterior, TrainReport> train(const FeatureSet& train_set,
                                                const Architecture& arch,
                                                const ReferenceDistribution& pi,
                                                const TrainConfig& cfg);

// Eq.-style risk certificate: rho*[r] + (KL + ln(1/delta))/sqrt(m)
//   + epsilon^2/(2 sqrt(m))
//   + sqrt((epsilon/delta) * 2 (mc_lip D + 1) exp(-lambda (a-p)) (2 KL + 1))
double pac_bound(const GaussianPosterior& rho, const ReferenceDistribution& pi,
                 const FeatureSet& train_set, const Architecture& arch,
                 const TrainConfig& cfg, double mc_lip, double lambda, int a, int p);

// Posterior + report serialization (JSON document).
struct SavedPosterior {
  std::string arch;  // "w^l"
  int input_dim = 0;
  double s = 1.0;
  GaussianPosterior rho;
  TrainReport report;
};

void save_posterior(const std::string& path, const SavedPosterior& sp);
SavedPosterior load_posterior(const std::string& path);

}  // namespace stouf
