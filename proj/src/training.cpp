#include "stouf/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace stouf {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0,1)");
  if (!(eta > 0.0) && eta != 0.0) throw ConfigError("eta must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 0) throw ConfigError("batch size must be >= 0");
  if (bound_mc_draws < 1 || mc_lip_draws < 1) throw ConfigError("MC draw counts must be >= 1");
}

double truncated_loss(double x, double y, double epsilon) {
  return std::min(std::abs(x - y), epsilon);
}

double target_value(double r_hat, double kl_value, double mc_lip, int D, Eigen::Index m) {
  if (m < 1) throw ConfigError("target_value needs m >= 1");
  const double C = mc_lip * D + 1.0;
  return r_hat + (kl_value + std::sqrt((2.0 * kl_value + 1.0) * C)) /
                     std::sqrt(static_cast<double>(m));
}

double empirical_risk(const Architecture& arch, const Eigen::VectorXd& theta,
                      const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                      double epsilon) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    sum += truncated_loss(forward(arch, theta, inputs.row(i).transpose()), targets(i), epsilon);
  return sum / static_cast<double>(inputs.rows());
}

AdamState AdamState::initial(Eigen::Index d) {
  AdamState st;
  st.m1 = Eigen::VectorXd::Zero(2 * d);
  st.m2 = Eigen::VectorXd::Zero(2 * d);
  return st;
}

double frozen_objective(const Architecture& arch, const GaussianPosterior& rho,
                        const ReferenceDistribution& pi, double mc_lip,
                        Eigen::Index m_total, double epsilon, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets, const Eigen::VectorXd& eps) {
  const Eigen::VectorXd theta =
      rho.mu.array() + rho.kappa().array().sqrt() * eps.array();
  const double r_hat = empirical_risk(arch, theta, inputs, targets, epsilon);
  return target_value(r_hat, kl(rho, pi), mc_lip, arch.input_dim, m_total);
}

Eigen::VectorXd objective_gradient(const Architecture& arch, const GaussianPosterior& rho,
                                   const ReferenceDistribution& pi, double mc_lip,
                                   Eigen::Index m_total, double epsilon,
                                   const Eigen::MatrixXd& inputs,
                                   const Eigen::VectorXd& targets, const ThetaDraw& draw) {
  const Eigen::Index d = rho.mu.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    g += backward(arch, draw.theta, inputs.row(i).transpose(), targets(i), epsilon);
  g /= static_cast<double>(inputs.rows());

  // Risk part: pathwise chain rule through theta = mu + softplus(raw) .* eps.
  const Eigen::ArrayXd raw = rho.raw_kappa.array();
  const Eigen::ArrayXd sp = raw.unaryExpr([](double r) { return softplus(r); });
  const Eigen::ArrayXd sig = raw.unaryExpr([](double r) { return sigmoid(r); });
  Eigen::VectorXd grad_mu = g;
  Eigen::VectorXd grad_raw = (g.array() * draw.eps.array() * sig).matrix();

  // Penalty part is deterministic in (mu, raw); mc_lip is a frozen constant.
  const double kl_value = kl(rho, pi);
  const double C = mc_lip * arch.input_dim + 1.0;
  const double dP_dKL =
      (1.0 + std::sqrt(C / (2.0 * kl_value + 1.0))) / std::sqrt(static_cast<double>(m_total));
  const Eigen::ArrayXd kappa = sp * sp;
  grad_mu.array() += dP_dKL * rho.mu.array() / pi.s;
  const Eigen::ArrayXd dKL_dkappa = 0.5 * (1.0 / pi.s - 1.0 / kappa);
  grad_raw.array() += dP_dKL * dKL_dkappa * 2.0 * sp * sig;

  Eigen::VectorXd grad(2 * d);
  grad << grad_mu, grad_raw;
  return grad;
}

void step(TrainState& st, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
          RandomStream& rng) {
  if (inputs.rows() == 0) throw ConfigError("empty batch");
  const Eigen::Index d = st.rho.mu.size();

  const ThetaDraw draw = sample_theta(st.rho, rng);
  const Eigen::VectorXd grad = objective_gradient(
      st.arch, st.rho, st.pi, st.mc_lip, st.m_total, st.cfg.epsilon, inputs, targets, draw);
  if (!grad.allFinite())
    throw NumericError("non-finite gradient during training step " +
                       std::to_string(st.adam.t + 1));

  ++st.adam.t;
  st.adam.m1 = st.cfg.beta1 * st.adam.m1 + (1.0 - st.cfg.beta1) * grad;
  st.adam.m2.array() =
      st.cfg.beta2 * st.adam.m2.array() + (1.0 - st.cfg.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.adam.t));
  const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.adam.t));
  const Eigen::ArrayXd upd =
      st.cfg.eta * (st.adam.m1.array() / bc1) /
      ((st.adam.m2.array() / bc2).sqrt() + st.cfg.eps_adam);
  st.rho.mu.array() -= upd.head(d);
  st.rho.raw_kappa.array() -= upd.tail(d);
}

std::pair<GaussianPosterior, TrainReport> train(const FeatureSet& train_set,
                                                const Architecture& arch,
                                                const ReferenceDistribution& pi,
                                                const TrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  if (train_set.role != SplitRole::train) throw ConfigError("train() needs the train split");
  const Eigen::Index m = train_set.inputs.rows();
  if (m < 1) throw ConfigError("empty training set");
  if (train_set.inputs.cols() != arch.input_dim)
    throw ConfigError("feature dimension does not match architecture input");

  const auto t_start = std::chrono::steady_clock::now();

  TrainState st;
  st.arch = arch;
  st.rho = GaussianPosterior::initial(arch.param_count());
  st.pi = pi;
  st.adam = AdamState::initial(arch.param_count());
  st.m_total = m;
  st.cfg = cfg;

  RandomStream rng_lip(derive_seed(cfg.seed, stage::mc_lip));
  st.mc_lip = mc_lip_reference(arch, pi, cfg.mc_lip_draws, rng_lip);

  RandomStream rng_path(derive_seed(cfg.seed, stage::train_path));
  RandomStream rng_log(derive_seed(cfg.seed, stage::train_log));

  auto full_target = [&]() {
    const ThetaDraw d = sample_theta(st.rho, rng_log);
    const double r_hat =
        empirical_risk(arch, d.theta, train_set.inputs, train_set.targets, cfg.epsilon);
    return target_value(r_hat, kl(st.rho, st.pi), st.mc_lip, arch.input_dim, m);
  };

  TrainReport report;
  report.mc_lip = st.mc_lip;
  report.initial_target = full_target();

  const Eigen::Index bs = cfg.batch == 0 ? m : std::min(cfg.batch, m);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Eigen::Index first = 0; first < m; first += bs) {
      const Eigen::Index count = std::min(bs, m - first);
      step(st, train_set.inputs.middleRows(first, count),
           train_set.targets.segment(first, count), rng_path);
    }
    report.target_curve.push_back(full_target());
  }
  report.final_target = report.target_curve.back();
  report.kl_value = kl(st.rho, st.pi);

  report.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {st.rho, report};
}

double pac_bound(const GaussianPosterior& rho, const ReferenceDistribution& pi,
                 const FeatureSet& train_set, const Architecture& arch,
                 const TrainConfig& cfg, double mc_lip, double lambda, int a, int p) {
  const Eigen::Index m = train_set.inputs.rows();
  if (m < 1) throw ConfigError("empty training set");
  RandomStream rng(derive_seed(cfg.seed, stage::bound));
  GaussianPosterior r = rho;
  double risk = 0.0;
  for (int i = 0; i < cfg.bound_mc_draws; ++i) {
    const ThetaDraw d = sample_theta(r, rng);
    risk += empirical_risk(arch, d.theta, train_set.inputs, train_set.targets, cfg.epsilon);
  }
  risk /= cfg.bound_mc_draws;

  const double kl_value = kl(rho, pi);
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double dep = (cfg.epsilon / cfg.delta) * 2.0 * (mc_lip * arch.input_dim + 1.0) *
                     std::exp(-lambda * (a - p)) * (2.0 * kl_value + 1.0);
  return risk + (kl_value + std::log(1.0 / cfg.delta)) / sqrt_m +
         cfg.epsilon * cfg.epsilon / (2.0 * sqrt_m) + std::sqrt(dep);
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

void save_posterior(const std::string& path, const SavedPosterior& sp) {
  json j;
  j["arch"] = sp.arch;
  j["input_dim"] = sp.input_dim;
  j["s"] = sp.s;
  j["d"] = sp.rho.mu.size();
  j["mu"] = vec_to_json(sp.rho.mu);
  j["raw_kappa"] = vec_to_json(sp.rho.raw_kappa);
  json r;
  r["initial_target"] = sp.report.initial_target;
  r["final_target"] = sp.report.final_target;
  r["target_curve"] = sp.report.target_curve;
  r["kl"] = sp.report.kl_value;
  r["mc_lip"] = sp.report.mc_lip;
  r["pac_bound"] = sp.report.pac_bound_value;
  r["rho_r"] = sp.report.rho_r;
  r["wallclock_s"] = sp.report.wallclock_s;
  r["vacuous"] = sp.report.vacuous;
  j["report"] = r;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write posterior file: " + path);
  out << j.dump(2) << "\n";
}

SavedPosterior load_posterior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open posterior file: " + path);
  json j = json::parse(in);
  SavedPosterior sp;
  sp.arch = j.at("arch").get<std::string>();
  sp.input_dim = j.at("input_dim").get<int>();
  sp.s = j.at("s").get<double>();
  sp.rho.mu = vec_from_json(j.at("mu"));
  sp.rho.raw_kappa = vec_from_json(j.at("raw_kappa"));
  if (sp.rho.mu.size() != j.at("d").get<Eigen::Index>())
    throw ConfigError("posterior file length mismatch: " + path);
  const json& r = j.at("report");
  sp.report.initial_target = r.at("initial_target").get<double>();
  sp.report.final_target = r.at("final_target").get<double>();
  sp.report.target_curve = r.at("target_curve").get<std::vector<double>>();
  sp.report.kl_value = r.at("kl").get<double>();
  sp.report.mc_lip = r.at("mc_lip").get<double>();
  sp.report.pac_bound_value = r.at("pac_bound").get<double>();
  sp.report.rho_r = r.at("rho_r").get<double>();
  sp.report.wallclock_s = r.at("wallclock_s").get<double>();
  sp.report.vacuous = r.at("vacuous").get<bool>();
  return sp;
}

}  // namespace stouf
