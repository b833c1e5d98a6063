#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stouf/training.hpp"

using namespace stouf;

namespace {

Eigen::VectorXd random_vec(Eigen::Index n, RandomStream& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.gaussian();
  return v;
}

FeatureSet linear_toy(Eigen::Index m, std::uint64_t seed) {
  // Y = 2X, no noise
  RandomStream rng(seed);
  FeatureSet f;
  f.role = SplitRole::train;
  f.inputs = random_vec(m, rng).cwiseAbs();
  f.targets = 2.0 * f.inputs;
  f.inputs.resize(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) f.time_indices.push_back(i + 1);
  return f;
}

}  // namespace

TEST_CASE("truncated loss") {
  CHECK(truncated_loss(5, 1, 3) == 3.0);
  CHECK(truncated_loss(2, 1, 3) == 1.0);
  CHECK(truncated_loss(7.5, 7.5, 0.1) == 0.0);
}

TEST_CASE("target value plug-in arithmetic") {
  CHECK(target_value(0.0, 0.0, 1.0, 3, 4) == doctest::Approx(1.0));
  CHECK(target_value(0.7, 0.0, 0.0, 42, 1) == doctest::Approx(1.7));
  // monotone in KL
  double prev = target_value(0.5, 0.0, 2.0, 3, 100);
  for (double k : {0.5, 1.0, 4.0, 16.0}) {
    const double v = target_value(0.5, k, 2.0, 3, 100);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(target_value(0.5, 1.0, 2.0, 3, 100) >= 0.5);  // target >= r_hat
}

TEST_CASE("pathwise gradient matches finite differences on the frozen objective") {
  RandomStream rng(404);
  int bad = 0, total = 0;
  for (int rep = 0; rep < 25; ++rep) {
    Architecture arch;
    arch.input_dim = 1 + static_cast<int>(rng.uniform() * 3);
    arch.hidden = {1 + static_cast<int>(rng.uniform() * 4)};
    const Eigen::Index d = arch.param_count();
    GaussianPosterior rho;
    rho.mu = random_vec(d, rng, 0.4);
    rho.raw_kappa = random_vec(d, rng, 0.3);
    ReferenceDistribution pi{0.5 + rng.uniform()};
    const double mc_lip = 0.5 + rng.uniform();
    const Eigen::Index m_total = 50;
    const double eps_loss = 3.0;

    const Eigen::Index batch = 5;
    Eigen::MatrixXd X(batch, arch.input_dim);
    Eigen::VectorXd y(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
      X.row(i) = random_vec(arch.input_dim, rng).transpose();
      y(i) = rng.gaussian();
    }

    ThetaDraw draw;
    draw.eps = random_vec(d, rng);
    draw.theta = rho.mu.array() + rho.kappa().array().sqrt() * draw.eps.array();

    // skip configurations near loss kinks (truncation / zero crossing)
    bool near_kink = false;
    for (Eigen::Index i = 0; i < batch; ++i) {
      const double diff = std::abs(forward(arch, draw.theta, X.row(i).transpose()) - y(i));
      if (diff < 1e-3 || std::abs(diff - eps_loss) < 1e-3) near_kink = true;
    }
    if (near_kink) continue;

    const auto g = objective_gradient(arch, rho, pi, mc_lip, m_total, eps_loss, X, y, draw);
    const double fd = 1e-6;
    for (Eigen::Index i = 0; i < 2 * d; ++i) {
      GaussianPosterior rp = rho, rm = rho;
      if (i < d) {
        rp.mu(i) += fd;
        rm.mu(i) -= fd;
      } else {
        rp.raw_kappa(i - d) += fd;
        rm.raw_kappa(i - d) -= fd;
      }
      const double num =
          (frozen_objective(arch, rp, pi, mc_lip, m_total, eps_loss, X, y, draw.eps) -
           frozen_objective(arch, rm, pi, mc_lip, m_total, eps_loss, X, y, draw.eps)) /
          (2 * fd);
      ++total;
      const double denom = std::max({std::abs(num), std::abs(g(i)), 1e-6});
      if (std::abs(g(i) - num) / denom > 1e-4) ++bad;
    }
  }
  CHECK(total > 200);
  CHECK(bad == 0);
}

TEST_CASE("penalty-only gradient is analytic to 1e-8") {
  // With the loss on its plateau the gradient is pure penalty; compare to
  // finite differences with a tight tolerance (no MC noise in it).
  Architecture arch;
  arch.input_dim = 1;
  arch.hidden = {2};
  const Eigen::Index d = arch.param_count();
  RandomStream rng(31);
  GaussianPosterior rho;
  rho.mu = random_vec(d, rng, 0.2);
  rho.raw_kappa = random_vec(d, rng, 0.2);
  ReferenceDistribution pi{1.0};
  Eigen::MatrixXd X(1, 1);
  X << 0.5;
  Eigen::VectorXd y(1);
  y << 1e6;  // far beyond truncation: zero risk gradient
  ThetaDraw draw;
  draw.eps = random_vec(d, rng);
  draw.theta = rho.mu.array() + rho.kappa().array().sqrt() * draw.eps.array();
  const auto g = objective_gradient(arch, rho, pi, 1.3, 40, 3.0, X, y, draw);
  const double fd = 1e-5;
  for (Eigen::Index i = 0; i < 2 * d; ++i) {
    GaussianPosterior rp = rho, rm = rho;
    (i < d ? rp.mu(i) : rp.raw_kappa(i - d)) += fd;
    (i < d ? rm.mu(i) : rm.raw_kappa(i - d)) -= fd;
    const double num =
        (frozen_objective(arch, rp, pi, 1.3, 40, 3.0, X, y, draw.eps) -
         frozen_objective(arch, rm, pi, 1.3, 40, 3.0, X, y, draw.eps)) /
        (2 * fd);
    CHECK(g(i) == doctest::Approx(num).epsilon(1e-7));
  }
}

TEST_CASE("zero learning rate leaves the posterior unchanged") {
  auto f = linear_toy(20, 1);
  auto arch = Architecture::parse("2^1", 1);
  TrainConfig cfg;
  cfg.eta = 0.0;
  cfg.epochs = 1;
  auto [rho, rep] = train(f, arch, ReferenceDistribution{1.0}, cfg);
  const auto init = GaussianPosterior::initial(arch.param_count());
  CHECK(rho.mu == init.mu);
  CHECK(rho.raw_kappa == init.raw_kappa);
  CHECK(rep.target_curve.size() == 1);
}

TEST_CASE("plateau loss: only the penalty moves parameters, mu shrinks") {
  Architecture arch;
  arch.input_dim = 1;
  arch.hidden = {2};
  const Eigen::Index d = arch.param_count();
  TrainState st;
  st.arch = arch;
  st.rho.mu = Eigen::VectorXd::Constant(d, 2.0);
  st.rho.raw_kappa = Eigen::VectorXd::Constant(d, softplus_inv(0.5));
  st.pi = ReferenceDistribution{1.0};
  st.adam = AdamState::initial(d);
  st.mc_lip = 1.0;
  st.m_total = 10;
  st.cfg.eta = 0.01;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd y(1);
  y << 1e9;
  RandomStream rng(2);
  const double mu0 = st.rho.mu.norm();
  for (int i = 0; i < 50; ++i) step(st, X, y, rng);
  CHECK(st.rho.mu.norm() < mu0);
}

TEST_CASE("training reduces the empirical risk on the linear toy") {
  auto f = linear_toy(200, 3);
  auto arch = Architecture::parse("4^1", 1);
  ReferenceDistribution pi{1.0};
  TrainConfig cfg;
  cfg.eta = 0.02;
  cfg.epochs = 40;
  cfg.seed = 9;
  auto [rho, rep] = train(f, arch, pi, cfg);
  RandomStream rng(123);
  double r0 = 0, r1 = 0;
  const auto init = GaussianPosterior::initial(arch.param_count());
  for (int i = 0; i < 50; ++i) {
    r0 += empirical_risk(arch, sample_theta(init, rng).theta, f.inputs, f.targets, cfg.epsilon);
    r1 += empirical_risk(arch, sample_theta(rho, rng).theta, f.inputs, f.targets, cfg.epsilon);
  }
  CHECK(r1 < r0);
  CHECK(static_cast<int>(rep.target_curve.size()) == cfg.epochs);
  CHECK(rep.final_target == rep.target_curve.back());
  CHECK(rep.kl_value >= 0.0);
}

TEST_CASE("training is deterministic for fixed seed") {
  auto f = linear_toy(50, 4);
  auto arch = Architecture::parse("3^1", 1);
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.epochs = 3;
  cfg.seed = 42;
  cfg.mc_lip_draws = 50;
  auto [ra, pa] = train(f, arch, ReferenceDistribution{0.5}, cfg);
  auto [rb, pb] = train(f, arch, ReferenceDistribution{0.5}, cfg);
  CHECK(ra.mu == rb.mu);
  CHECK(ra.raw_kappa == rb.raw_kappa);
  CHECK(pa.target_curve == pb.target_curve);
  CHECK(pa.mc_lip == pb.mc_lip);
}

TEST_CASE("pac bound structure") {
  auto f = linear_toy(100, 5);
  auto arch = Architecture::parse("3^1", 1);
  ReferenceDistribution pi{1.0};
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.epochs = 5;
  cfg.seed = 7;
  cfg.mc_lip_draws = 100;
  auto [rho, rep] = train(f, arch, pi, cfg);

  const double b = pac_bound(rho, pi, f, arch, cfg, rep.mc_lip, 0.5, 10, 1);
  // vanishing dependence term leaves the three-addend core
  const double core = pac_bound(rho, pi, f, arch, cfg, rep.mc_lip, 1e9, 10, 1);
  const double kl_v = kl(rho, pi);
  RandomStream brng(derive_seed(cfg.seed, stage::bound));
  double risk = 0.0;
  for (int i = 0; i < cfg.bound_mc_draws; ++i)
    risk += empirical_risk(arch, sample_theta(rho, brng).theta, f.inputs, f.targets, cfg.epsilon);
  risk /= cfg.bound_mc_draws;
  const double expect = risk + (kl_v + std::log(1.0 / cfg.delta)) / 10.0 +
                        cfg.epsilon * cfg.epsilon / 20.0;
  CHECK(core == doctest::Approx(expect).epsilon(1e-12));
  CHECK(b >= core);
  CHECK(b >= risk);  // bound >= rho*[r]
}

TEST_CASE("posterior file round trip") {
  auto f = linear_toy(30, 6);
  auto arch = Architecture::parse("2^1", 1);
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.epochs = 2;
  cfg.mc_lip_draws = 10;
  auto [rho, rep] = train(f, arch, ReferenceDistribution{1.0}, cfg);
  SavedPosterior sp{"2^1", 1, 1.0, rho, rep};
  const auto path = (std::filesystem::temp_directory_path() / "stouf_post.json").string();
  save_posterior(path, sp);
  const auto back = load_posterior(path);
  CHECK(back.arch == "2^1");
  CHECK(back.rho.mu == rho.mu);
  CHECK(back.rho.raw_kappa == rho.raw_kappa);
  CHECK(back.report.target_curve == rep.target_curve);
  CHECK(back.report.mc_lip == rep.mc_lip);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epochs = 1;
  cfg.delta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
