#include "stouf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace stouf {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  if (data_file.empty() == !simulate_data)
    throw ConfigError("config needs exactly one of data.file or sim.*");
  if (s_grid.empty()) throw ConfigError("s grid must be non-empty");
  for (double s : s_grid)
    if (!(s > 0.0)) throw ConfigError("s grid values must be positive");
  if (archs.empty()) throw ConfigError("need at least one architecture");
  if (J < 2) throw ConfigError("ensemble size J must be >= 2");
  if (est_tau < 1 || est_u < 1) throw ConfigError("variogram lags must be >= 1");
  if (sweep_epochs < 0) throw ConfigError("sweep epochs must be >= 0");
  train.validate();
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  PipelineConfig cfg;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };

  get("data.file", cfg.data_file);
  if (j.contains("sim.N")) {
    cfg.simulate_data = true;
    cfg.sim_grid.N = j.at("sim.N").get<Eigen::Index>();
    cfg.sim_grid.P = j.at("sim.P").get<Eigen::Index>();
    cfg.sim_model.A = j.at("sim.A").get<double>();
    cfg.sim_model.c = j.at("sim.c").get<double>();
    get("sim.dt", cfg.sim_grid.dt);
    get("sim.dx", cfg.sim_grid.dx);
    get("sim.refine", cfg.sim_grid.refine);
    get("sim.tol", cfg.sim_grid.trunc_tol);
    std::string kind = "gaussian";
    get("levy.kind", kind);
    cfg.sim_model.basis.kind = levy_kind_from_string(kind);
    get("levy.sigma2", cfg.sim_model.basis.sigma2);
    get("levy.alpha", cfg.sim_model.basis.alpha);
    get("levy.beta", cfg.sim_model.basis.beta);
    get("levy.delta", cfg.sim_model.basis.delta_rate);
  }

  std::string mode;
  get("detrend.mode", mode);
  if (!mode.empty()) cfg.detrend_mode = detrend_mode_from_string(mode);
  get("est.tau", cfg.est_tau);
  get("est.u", cfg.est_u);
  get("embed.p", cfg.p);
  get("embed.epsilon", cfg.epsilon);
  get("embed.delta", cfg.delta);
  get("embed.n_test", cfg.n_test);
  get("embed.force_a", cfg.force_a);
  if (j.contains("arch")) {
    if (j.at("arch").is_string()) cfg.archs = {j.at("arch").get<std::string>()};
    else cfg.archs = j.at("arch").get<std::vector<std::string>>();
  }
  get("s.grid", cfg.s_grid);
  get("train.eta", cfg.train.eta);
  get("train.batch", cfg.train.batch);
  get("train.epochs", cfg.train.epochs);
  get("train.bound_mc_draws", cfg.train.bound_mc_draws);
  get("train.mc_lip_draws", cfg.train.mc_lip_draws);
  get("train.sweep_epochs", cfg.sweep_epochs);
  get("ensemble.J", cfg.J);
  get("ensemble.H", cfg.H);
  get("seed", cfg.seed);
  get("out", cfg.out);
  cfg.train.epsilon = cfg.epsilon;
  cfg.train.delta = cfg.delta;
  cfg.sim_grid.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

namespace {

std::vector<PositionHistory> make_histories(const FeatureBundle& fb) {
  std::vector<PositionHistory> out;
  for (const auto& pf : fb.per_position) out.push_back(concat_history(pf, fb.plan));
  return out;
}

struct TrainedGridPoint {
  std::vector<PositionModel> models;
  std::vector<TrainReport> reports;
};

TrainedGridPoint train_all_positions(const FeatureBundle& fb, const Architecture& arch,
                                     double s_precision, const TrainConfig& base,
                                     std::uint64_t master_seed, std::uint64_t grid_index) {
  TrainedGridPoint tp;
  ReferenceDistribution pi{1.0 / s_precision};
  for (std::size_t r = 0; r < fb.per_position.size(); ++r) {
    TrainConfig cfg = base;
    cfg.seed = derive_seed(master_seed, stage::train_run, r, grid_index);
    auto [rho, report] = train(fb.per_position[r].train, arch, pi, cfg);
    tp.models.push_back({arch, std::move(rho)});
    tp.reports.push_back(std::move(report));
  }
  return tp;
}

}  // namespace

GridSearchResult validate_reference(const FeatureBundle& features, const Architecture& arch,
                                    const std::vector<double>& s_grid, const TrainConfig& cfg,
                                    int sweep_epochs, int J, std::uint64_t master_seed) {
  if (s_grid.empty()) throw ConfigError("empty s grid");
  const auto histories = make_histories(features);
  const Eigen::Index val_start = features.plan.m + 1;

  GridSearchResult res;
  res.grid = s_grid;
  std::size_t best = 0;
  TrainedGridPoint best_tp;
  TrainConfig sweep_cfg = cfg;
  if (sweep_epochs > 0) sweep_cfg.epochs = sweep_epochs;

  for (std::size_t gi = 0; gi < s_grid.size(); ++gi) {
    auto tp = train_all_positions(features, arch, s_grid[gi], sweep_cfg, master_seed, gi);
    RandomStream rng(derive_seed(master_seed, stage::val_forecast, gi));
    const auto ef = generate_ensemble(tp.models, histories, val_start, 0, J, rng);
    double avg = 0.0;
    for (std::size_t r = 0; r < tp.models.size(); ++r)
      avg += crps(ef.members[r].col(0), ef.observations(0, static_cast<Eigen::Index>(r)));
    avg /= static_cast<double>(tp.models.size());
    res.val_crps.push_back(avg);
    if (gi == 0 || avg < res.val_crps[best]) {  // ties keep the earlier (smaller) s
      best = gi;
      best_tp = std::move(tp);
    }
  }
  res.s_star = s_grid[best];

  if (sweep_epochs > 0 && sweep_epochs != cfg.epochs)
    best_tp = train_all_positions(features, arch, res.s_star, cfg, master_seed, best);
  res.models = std::move(best_tp.models);
  res.reports = std::move(best_tp.reports);
  return res;
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out);
  RunManifest man;

  RasterSeries raw;
  if (cfg.simulate_data) {
    raw = simulate(cfg.sim_model, cfg.sim_grid);
    man.raster_file = (fs::path(cfg.out) / "raster.csv").string();
    save_raster(raw, man.raster_file);
  } else {
    raw = load_raster(cfg.data_file);
    man.raster_file = cfg.data_file;
  }

  auto [r, dinfo] = detrend(raw, cfg.detrend_mode);
  man.raw_variance = empirical_variance(r);
  man.estimates = estimate_params(r, cfg.est_tau, cfg.est_u);

  man.plan = make_plan(man.estimates.c_star, man.estimates.lambda_star, cfg.p, cfg.epsilon,
                       cfg.delta, cfg.n_test, r.n_times(), r.n_positions(), cfg.force_a);
  FeatureBundle fb;
  fb.plan = man.plan;
  for (auto pos : man.plan.positions_used)
    fb.per_position.push_back(extract_features(r, man.plan, pos));
  man.features_dir = (fs::path(cfg.out) / "features").string();
  save_features(man.features_dir, fb);

  const auto histories = make_histories(fb);
  const Eigen::Index n_total = man.plan.N / man.plan.a;
  const Eigen::Index val_start = man.plan.m + 1;
  const Eigen::Index test_start = man.plan.m + 2;
  const int H = cfg.H >= 0 ? cfg.H : static_cast<int>(n_total - test_start);

  for (std::size_t ai = 0; ai < cfg.archs.size(); ++ai) {
    const Architecture arch = Architecture::parse(cfg.archs[ai], man.plan.D);
    const std::uint64_t arch_seed = derive_seed(cfg.seed, stage::train_run, 0xA0 + ai);
    auto gsr = validate_reference(fb, arch, cfg.s_grid, cfg.train, cfg.sweep_epochs, cfg.J,
                                  arch_seed);

    ArchSummary sum;
    sum.arch = cfg.archs[ai];
    sum.s_star = gsr.s_star;
    sum.grid_crps = gsr.val_crps;
    sum.horizons = H + 1;

    const fs::path arch_dir = fs::path(cfg.out) / ("arch_" + cfg.archs[ai]);
    fs::create_directories(arch_dir);
    sum.posterior_dir = arch_dir.string();

    ReferenceDistribution pi{1.0 / gsr.s_star};
    const std::size_t best_gi = static_cast<std::size_t>(
        std::find(gsr.grid.begin(), gsr.grid.end(), gsr.s_star) - gsr.grid.begin());
    double pac_sum = 0.0, target_sum = 0.0;
    for (std::size_t rr = 0; rr < gsr.models.size(); ++rr) {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(arch_seed, stage::train_run, rr, best_gi);
      TrainReport rep = gsr.reports[rr];
      rep.pac_bound_value =
          pac_bound(gsr.models[rr].rho, pi, fb.per_position[rr].train, arch, tc, rep.mc_lip,
                    man.estimates.lambda_star, man.plan.a, man.plan.p);
      // Same stream pac_bound uses, so rho_r equals the bound's risk term.
      RandomStream brng(derive_seed(tc.seed, stage::bound));
      double risk = 0.0;
      for (int i = 0; i < tc.bound_mc_draws; ++i) {
        const ThetaDraw d = sample_theta(gsr.models[rr].rho, brng);
        risk += empirical_risk(arch, d.theta, fb.per_position[rr].train.inputs,
                               fb.per_position[rr].train.targets, tc.epsilon);
      }
      rep.rho_r = risk / tc.bound_mc_draws;
      rep.vacuous = rep.pac_bound_value >= tc.epsilon;
      pac_sum += rep.pac_bound_value;
      target_sum += rep.final_target;
      sum.any_vacuous = sum.any_vacuous || rep.vacuous;

      SavedPosterior sp;
      sp.arch = cfg.archs[ai];
      sp.input_dim = man.plan.D;
      sp.s = pi.s;
      sp.rho = gsr.models[rr].rho;
      sp.report = rep;
      save_posterior((arch_dir / ("pos" + std::to_string(man.plan.positions_used[rr]) +
                                  ".json")).string(),
                     sp);
    }
    sum.pac_bound_mean = pac_sum / static_cast<double>(gsr.models.size());
    sum.target_final = target_sum / static_cast<double>(gsr.models.size());

    {
      RandomStream rng(derive_seed(arch_seed, stage::val_forecast, 0xBE57));
      auto vef = generate_ensemble(gsr.models, histories, val_start, 0, cfg.J, rng);
      vef.a = man.plan.a;
      save_ensemble((arch_dir / "validation_ensemble.csv").string(), vef);
      const auto vrep = evaluate(vef, derive_seed(arch_seed, stage::pit, 0));
      save_report((arch_dir / "validation_report.json").string(), vrep);
      sum.val_crps = vrep.crps_mean;
      sum.val_rmse = vrep.rmse_mean;
    }
    {
      RandomStream rng(derive_seed(arch_seed, stage::test_forecast));
      auto tef = generate_ensemble(gsr.models, histories, test_start, H, cfg.J, rng);
      tef.a = man.plan.a;
      sum.test_ensemble = (arch_dir / "test_ensemble.csv").string();
      save_ensemble(sum.test_ensemble, tef);
      const auto trep = evaluate(tef, derive_seed(arch_seed, stage::pit, 1));
      sum.test_report = (arch_dir / "test_report.json").string();
      save_report(sum.test_report, trep);
      save_plot_data((arch_dir / "plots").string(), tef, trep);
      sum.test_crps = trep.crps_mean;
      sum.test_rmse = trep.rmse_mean;
    }
    sum.crps_ratio = sum.val_crps > 0.0 ? sum.test_crps / sum.val_crps : 0.0;
    man.archs.push_back(std::move(sum));
  }

  save_manifest((fs::path(cfg.out) / "manifest.json").string(), cfg, man);
  return man;
}

void save_manifest(const std::string& path, const PipelineConfig& cfg,
                   const RunManifest& man) {
  json j;
  json c;
  c["data.file"] = cfg.data_file;
  if (cfg.simulate_data) {
    c["sim.N"] = cfg.sim_grid.N;
    c["sim.P"] = cfg.sim_grid.P;
    c["sim.A"] = cfg.sim_model.A;
    c["sim.c"] = cfg.sim_model.c;
    c["levy.kind"] = to_string(cfg.sim_model.basis.kind);
  }
  c["detrend.mode"] = to_string(cfg.detrend_mode);
  c["est.tau"] = cfg.est_tau;
  c["est.u"] = cfg.est_u;
  c["embed.p"] = cfg.p;
  c["embed.epsilon"] = cfg.epsilon;
  c["embed.delta"] = cfg.delta;
  c["embed.n_test"] = cfg.n_test;
  c["embed.force_a"] = cfg.force_a;
  c["arch"] = cfg.archs;
  c["s.grid"] = cfg.s_grid;
  c["train.eta"] = cfg.train.eta;
  c["train.batch"] = cfg.train.batch;
  c["train.epochs"] = cfg.train.epochs;
  c["train.sweep_epochs"] = cfg.sweep_epochs;
  c["ensemble.J"] = cfg.J;
  c["ensemble.H"] = cfg.H;
  c["seed"] = cfg.seed;
  c["out"] = cfg.out;
  j["config"] = c;

  j["raster_file"] = man.raster_file;
  j["features_dir"] = man.features_dir;
  j["variance"] = man.raw_variance;
  j["estimates"] = {{"A", man.estimates.A_star},
                    {"c", man.estimates.c_star},
                    {"lambda", man.estimates.lambda_star},
                    {"k2", man.estimates.k2_hat}};
  j["plan"] = {{"a", man.plan.a},
               {"m", man.plan.m},
               {"D", man.plan.D},
               {"p", man.plan.p},
               {"n_test", man.plan.n_test},
               {"positions_used", man.plan.positions_used}};
  json archs = json::array();
  for (const auto& s : man.archs) {
    json a;
    a["arch"] = s.arch;
    a["s_star"] = s.s_star;
    a["grid_val_crps"] = s.grid_crps;
    a["target_final"] = s.target_final;
    a["pac_bound_mean"] = s.pac_bound_mean;
    a["any_vacuous"] = s.any_vacuous;
    a["val_crps"] = s.val_crps;
    a["val_rmse"] = s.val_rmse;
    a["test_crps"] = s.test_crps;
    a["test_rmse"] = s.test_rmse;
    a["test_to_val_crps_ratio"] = s.crps_ratio;
    a["horizons"] = s.horizons;
    a["posterior_dir"] = s.posterior_dir;
    a["test_ensemble"] = s.test_ensemble;
    a["test_report"] = s.test_report;
    archs.push_back(a);
  }
  j["architectures"] = archs;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace stouf
