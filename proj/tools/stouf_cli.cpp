#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "stouf/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stouf;

namespace {

RasterSeries load_input(const std::string& path, const std::string& detrend_mode) {
  auto r = load_raster(path);
  auto [d, info] = detrend(r, detrend_mode_from_string(detrend_mode));
  return d;
}

EstimatedParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open params file: " + path);
  json j = json::parse(in);
  EstimatedParams p;
  p.A_star = j.at("A_star").get<double>();
  p.c_star = j.at("c_star").get<double>();
  p.lambda_star = j.at("lambda_star").get<double>();
  p.k2_hat = j.at("k2_hat").get<double>();
  p.tau = j.value("tau", 1.0);
  p.u = j.value("u", 1.0);
  return p;
}

std::vector<PositionModel> load_models(const std::string& dir, const EmbeddingPlan& plan) {
  std::vector<PositionModel> models;
  for (auto pos : plan.positions_used) {
    const auto sp =
        load_posterior((fs::path(dir) / ("pos" + std::to_string(pos) + ".json")).string());
    PositionModel m;
    m.arch = Architecture::parse(sp.arch, sp.input_dim);
    m.rho = sp.rho;
    models.push_back(std::move(m));
  }
  return models;
}

int run(int argc, char** argv) {
  CLI::App app{"Cone-embedded forecasting for space-time raster series"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Simulate a raster from the mean-reverting cone model");
  StouModel model;
  SimGrid grid;
  std::string levy_kind = "gaussian", sim_out;
  sim->add_option("--A", model.A, "mean-reversion rate")->required();
  sim->add_option("--c", model.c, "cone speed")->required();
  sim->add_option("--levy.kind", levy_kind, "gaussian | nig");
  sim->add_option("--levy.sigma2", model.basis.sigma2, "Gaussian variance per unit area");
  sim->add_option("--levy.alpha", model.basis.alpha, "NIG alpha");
  sim->add_option("--levy.beta", model.basis.beta, "NIG beta");
  sim->add_option("--levy.delta", model.basis.delta_rate, "NIG delta per unit area");
  sim->add_option("--N", grid.N, "time steps")->required();
  sim->add_option("--P", grid.P, "positions")->required();
  sim->add_option("--dt", grid.dt, "time step");
  sim->add_option("--dx", grid.dx, "grid spacing");
  sim->add_option("--refine", grid.refine, "sub-cells per axis");
  sim->add_option("--tol", grid.trunc_tol, "kernel truncation tolerance");
  sim->add_option("--seed", grid.seed, "seed");
  sim->add_option("--out", sim_out, "output raster CSV")->required();
  sim->callback([&] {
    model.basis.kind = levy_kind_from_string(levy_kind);
    save_raster(simulate(model, grid), sim_out);
  });

  // ---- estimate ----
  auto* est = app.add_subcommand("estimate", "Estimate A, c and the dependence decay rate");
  std::string est_in, est_out, est_detrend = "none";
  int est_tau = 1, est_u = 1;
  est->add_option("--in", est_in, "raster CSV")->required();
  est->add_option("--tau", est_tau, "temporal variogram lag (steps)");
  est->add_option("--u", est_u, "spatial variogram lag (grid units)");
  est->add_option("--detrend", est_detrend, "none | per_position_mean | global_mean");
  est->add_option("--out", est_out, "params JSON")->required();
  est->callback([&] {
    const auto r = load_input(est_in, est_detrend);
    const auto p = estimate_params(r, est_tau, est_u);
    json j = {{"A_star", p.A_star},     {"c_star", p.c_star}, {"lambda_star", p.lambda_star},
              {"k2_hat", p.k2_hat},     {"tau", p.tau},       {"u", p.u}};
    std::ofstream out(est_out);
    if (!out) throw ConfigError("cannot write params file: " + est_out);
    out << j.dump(2) << "\n";
    std::cout << "A=" << format_double(p.A_star) << " c=" << format_double(p.c_star)
              << " lambda=" << format_double(p.lambda_star)
              << " k2=" << format_double(p.k2_hat) << "\n";
  });

  // ---- features ----
  auto* feat = app.add_subcommand("features", "Extract cone-embedded features and splits");
  std::string f_in, f_params, f_out, f_detrend = "none";
  int f_p = 1, f_force_a = 0;
  double f_eps = 3.0, f_delta = 0.025;
  Eigen::Index f_ntest = 18;
  feat->add_option("--in", f_in, "raster CSV")->required();
  feat->add_option("--params", f_params, "params JSON from estimate")->required();
  feat->add_option("--p", f_p, "past depth");
  feat->add_option("--epsilon", f_eps, "accuracy level");
  feat->add_option("--delta", f_delta, "confidence level");
  feat->add_option("--n-test", f_ntest, "test examples");
  feat->add_option("--force-a", f_force_a, "override the stride selection");
  feat->add_option("--detrend", f_detrend, "none | per_position_mean | global_mean");
  feat->add_option("--out", f_out, "features directory")->required();
  feat->callback([&] {
    const auto r = load_input(f_in, f_detrend);
    const auto prm = load_params(f_params);
    FeatureBundle fb;
    fb.plan = make_plan(prm.c_star, prm.lambda_star, f_p, f_eps, f_delta, f_ntest,
                        r.n_times(), r.n_positions(), f_force_a);
    for (auto pos : fb.plan.positions_used)
      fb.per_position.push_back(extract_features(r, fb.plan, pos));
    save_features(f_out, fb);
    std::cout << "a=" << fb.plan.a << " m=" << fb.plan.m << " D=" << fb.plan.D
              << " positions=" << fb.plan.positions_used.size() << "\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train one posterior per position");
  std::string t_features, t_arch = "10^2", t_out;
  double t_s = 30.0;
  TrainConfig t_cfg;
  tr->add_option("--features", t_features, "features directory")->required();
  tr->add_option("--arch", t_arch, "architecture, e.g. 10^2");
  tr->add_option("--s", t_s, "reference precision (realized variance is 1/s)");
  tr->add_option("--epsilon", t_cfg.epsilon, "accuracy level");
  tr->add_option("--delta", t_cfg.delta, "confidence level");
  tr->add_option("--eta", t_cfg.eta, "Adam learning rate");
  tr->add_option("--batch", t_cfg.batch, "batch size (0 = full)");
  tr->add_option("--epochs", t_cfg.epochs, "epochs");
  tr->add_option("--bound-mc-draws", t_cfg.bound_mc_draws, "posterior draws for the risk term");
  tr->add_option("--mc-lip-draws", t_cfg.mc_lip_draws, "reference draws for the Lipschitz term");
  tr->add_option("--seed", t_cfg.seed, "seed");
  tr->add_option("--out", t_out, "posterior directory")->required();
  tr->callback([&] {
    if (!(t_s > 0.0)) throw ConfigError("--s must be positive");
    const auto fb = load_features(t_features);
    const Architecture arch = Architecture::parse(t_arch, fb.plan.D);
    const ReferenceDistribution pi{1.0 / t_s};
    fs::create_directories(t_out);
    const std::uint64_t master = t_cfg.seed;
    for (std::size_t r = 0; r < fb.per_position.size(); ++r) {
      TrainConfig cfg = t_cfg;
      cfg.seed = derive_seed(master, stage::train_run, r);
      auto [rho, rep] = train(fb.per_position[r].train, arch, pi, cfg);
      rep.pac_bound_value = pac_bound(rho, pi, fb.per_position[r].train, arch, cfg,
                                      rep.mc_lip, fb.plan.lambda, fb.plan.a, fb.plan.p);
      RandomStream brng(derive_seed(cfg.seed, stage::bound));
      double risk = 0.0;
      for (int i = 0; i < cfg.bound_mc_draws; ++i)
        risk += empirical_risk(arch, sample_theta(rho, brng).theta,
                               fb.per_position[r].train.inputs,
                               fb.per_position[r].train.targets, cfg.epsilon);
      rep.rho_r = risk / cfg.bound_mc_draws;
      rep.vacuous = rep.pac_bound_value >= cfg.epsilon;
      SavedPosterior sp{t_arch, fb.plan.D, pi.s, rho, rep};
      const auto pos = fb.plan.positions_used[r];
      save_posterior((fs::path(t_out) / ("pos" + std::to_string(pos) + ".json")).string(), sp);
      std::cout << "pos " << pos << ": target=" << format_double(rep.final_target)
                << " kl=" << format_double(rep.kl_value)
                << " bound=" << format_double(rep.pac_bound_value)
                << (rep.vacuous ? " (vacuous)" : "") << "\n";
    }
  });

  // ---- validate-prior ----
  auto* vp = app.add_subcommand("validate-prior", "Grid-search the reference precision");
  std::string v_features, v_arch = "10^2", v_out;
  std::vector<double> v_grid = {10, 30, 50, 70, 90, 110, 130, 150, 170, 190, 210};
  TrainConfig v_cfg;
  int v_sweep = 0, v_J = 100;
  std::uint64_t v_seed = 0;
  vp->add_option("--features", v_features, "features directory")->required();
  vp->add_option("--arch", v_arch, "architecture");
  vp->add_option("--s-grid", v_grid, "precision grid")->delimiter(',');
  vp->add_option("--eta", v_cfg.eta, "Adam learning rate");
  vp->add_option("--batch", v_cfg.batch, "batch size (0 = full)");
  vp->add_option("--epochs", v_cfg.epochs, "epochs for the final training");
  vp->add_option("--sweep-epochs", v_sweep, "reduced epochs during the sweep (0 = full)");
  vp->add_option("--J", v_J, "validation ensemble size");
  vp->add_option("--seed", v_seed, "seed");
  vp->add_option("--out", v_out, "posterior directory")->required();
  vp->callback([&] {
    const auto fb = load_features(v_features);
    const Architecture arch = Architecture::parse(v_arch, fb.plan.D);
    v_cfg.epsilon = fb.plan.epsilon;
    v_cfg.delta = fb.plan.delta;
    const auto gsr = validate_reference(fb, arch, v_grid, v_cfg, v_sweep, v_J, v_seed);
    fs::create_directories(v_out);
    json j;
    j["s_star"] = gsr.s_star;
    j["grid"] = gsr.grid;
    j["val_crps"] = gsr.val_crps;
    std::ofstream out(fs::path(v_out) / "grid_search.json");
    out << j.dump(2) << "\n";
    const ReferenceDistribution pi{1.0 / gsr.s_star};
    for (std::size_t r = 0; r < gsr.models.size(); ++r) {
      SavedPosterior sp{v_arch, fb.plan.D, pi.s, gsr.models[r].rho, gsr.reports[r]};
      const auto pos = fb.plan.positions_used[r];
      save_posterior((fs::path(v_out) / ("pos" + std::to_string(pos) + ".json")).string(), sp);
    }
    std::cout << "s_star=" << format_double(gsr.s_star) << "\n";
  });

  // ---- forecast ----
  auto* fc = app.add_subcommand("forecast", "Generate an ensemble forecast");
  std::string fc_post, fc_features, fc_out;
  Eigen::Index fc_start = 0;
  int fc_H = 0, fc_J = 100;
  std::uint64_t fc_seed = 0;
  fc->add_option("--posteriors", fc_post, "posterior directory")->required();
  fc->add_option("--features", fc_features, "features directory")->required();
  fc->add_option("--start", fc_start, "start example index")->required();
  fc->add_option("--H", fc_H, "terminal horizon");
  fc->add_option("--J", fc_J, "ensemble members");
  fc->add_option("--seed", fc_seed, "seed");
  fc->add_option("--out", fc_out, "ensemble CSV")->required();
  fc->callback([&] {
    const auto fb = load_features(fc_features);
    const auto models = load_models(fc_post, fb.plan);
    std::vector<PositionHistory> hist;
    for (const auto& pf : fb.per_position) hist.push_back(concat_history(pf, fb.plan));
    RandomStream rng(derive_seed(fc_seed, stage::forecast));
    auto ef = generate_ensemble(models, hist, fc_start, fc_H, fc_J, rng);
    ef.a = fb.plan.a;
    save_ensemble(fc_out, ef);
  });

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "Score an ensemble forecast");
  std::string e_in, e_out, e_plots;
  std::uint64_t e_seed = 0;
  ev->add_option("--ensemble", e_in, "ensemble CSV")->required();
  ev->add_option("--out", e_out, "report JSON")->required();
  ev->add_option("--plots", e_plots, "plot-data directory");
  ev->add_option("--seed", e_seed, "seed for randomized PIT");
  ev->callback([&] {
    const auto ef = load_ensemble(e_in);
    const auto rep = evaluate(ef, e_seed);
    save_report(e_out, rep);
    if (!e_plots.empty()) save_plot_data(e_plots, ef, rep);
    std::cout << "crps=" << format_double(rep.crps_mean)
              << " rmse=" << format_double(rep.rmse_mean) << "\n";
  });

  // ---- pipeline ----
  auto* pl = app.add_subcommand("pipeline", "Run the full workflow from a config file");
  std::string p_config;
  pl->add_option("--config", p_config, "config JSON with flat keys")->required();
  pl->callback([&] {
    const auto cfg = load_pipeline_config(p_config);
    const auto man = run_pipeline(cfg);
    for (const auto& a : man.archs)
      std::cout << a.arch << ": s*=" << format_double(a.s_star)
                << " test_crps=" << format_double(a.test_crps)
                << " val_crps=" << format_double(a.val_crps)
                << " bound=" << format_double(a.pac_bound_mean) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // bad flags are config errors
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
