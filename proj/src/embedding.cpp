#include "stouf/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace stouf {

namespace fs = std::filesystem;
using nlohmann::json;

void EmbeddingPlan::validate() const {
  if (p < 1) throw ConfigError("p must be >= 1");
  if (a < p + 1) throw ConfigError("stride a must satisfy a >= p+1");
  if (!(c > 0.0)) throw ConfigError("c must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0,1)");
  if (n_test < 0) throw ConfigError("n_test must be non-negative");
  if (m < 1) throw ConfigError("no training examples: m < 1");
  if (m != N / a - n_test - n_val) throw ConfigError("inconsistent split sizes");
  if (D != input_dimension(c, p)) throw ConfigError("inconsistent input dimension");
}

std::string to_string(SplitRole role) {
  switch (role) {
    case SplitRole::train: return "train";
    case SplitRole::validation: return "validation";
    case SplitRole::test: return "test";
  }
  return "train";
}

SplitRole split_role_from_string(const std::string& s) {
  if (s == "train") return SplitRole::train;
  if (s == "validation") return SplitRole::validation;
  if (s == "test") return SplitRole::test;
  throw ConfigError("unknown split role: " + s);
}

std::pair<int, Eigen::Index> select_a(double lambda, int p, double epsilon, double delta,
                                      Eigen::Index N, Eigen::Index n_test) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (p < 1) throw ConfigError("p must be >= 1");
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0))
    throw ConfigError("invalid epsilon or delta");
  // The left side decays and the right side grows in a, so the first hit of
  // the scan is the true minimum.
  const Eigen::Index a_max = N / (n_test + 2);
  for (int a = p + 1; a <= a_max; ++a) {
    const Eigen::Index m = N / a - n_test - 1;
    if (m < 1) break;
    if (std::exp(-lambda * (a - p)) <= delta / (2.0 * static_cast<double>(m) * epsilon))
      return {a, m};
  }
  throw ConfigError("series too short for dependence decay");
}

std::vector<std::pair<int, Eigen::Index>> build_index_template(Eigen::Index x_star, double c,
                                                               int p, Eigen::Index P) {
  std::vector<std::pair<int, Eigen::Index>> out;
  for (int tau = p; tau >= 1; --tau) {
    const auto half = static_cast<Eigen::Index>(std::floor(c * tau));
    if (x_star - half < 0 || x_star + half > P - 1)
      throw ConfigError("cone exceeds raster; position excluded");
    for (Eigen::Index x = x_star - half; x <= x_star + half; ++x) out.emplace_back(-tau, x);
  }
  return out;
}

std::vector<Eigen::Index> interior_positions(double c, int p, Eigen::Index P) {
  const auto half = static_cast<Eigen::Index>(std::floor(c * p));
  std::vector<Eigen::Index> out;
  for (Eigen::Index x = half; x <= P - 1 - half; ++x) out.push_back(x);
  return out;
}

int input_dimension(double c, int p) {
  int d = 0;
  for (int tau = 1; tau <= p; ++tau) d += 2 * static_cast<int>(std::floor(c * tau)) + 1;
  return d;
}

EmbeddingPlan make_plan(double c, double lambda, int p, double epsilon, double delta,
                        Eigen::Index n_test, Eigen::Index N, Eigen::Index P, int forced_a) {
  EmbeddingPlan plan;
  plan.p = p;
  plan.c = c;
  plan.lambda = lambda;
  plan.epsilon = epsilon;
  plan.delta = delta;
  plan.n_test = n_test;
  plan.N = N;
  if (forced_a > 0) {
    plan.a = forced_a;
    plan.m = N / forced_a - n_test - 1;
  } else {
    std::tie(plan.a, plan.m) = select_a(lambda, p, epsilon, delta, N, n_test);
  }
  plan.D = input_dimension(c, p);
  plan.positions_used = interior_positions(c, p, P);
  if (plan.positions_used.empty()) throw ConfigError("no interior positions for this cone");
  plan.validate();
  return plan;
}

PositionFeatures extract_features(const RasterSeries& r, const EmbeddingPlan& plan,
                                  Eigen::Index x_star) {
  plan.validate();
  if (r.n_times() < plan.N) throw ConfigError("raster shorter than the embedding plan");
  const auto offsets = build_index_template(x_star, plan.c, plan.p, r.n_positions());
  const Eigen::Index n_total = plan.N / plan.a;

  Eigen::MatrixXd inputs(n_total, plan.D);
  Eigen::VectorXd targets(n_total);
  for (Eigen::Index i = 1; i <= n_total; ++i) {
    const Eigen::Index target_row = i * plan.a - 1;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      const auto [dtime, x] = offsets[s];
      inputs(i - 1, static_cast<Eigen::Index>(s)) = r.values(target_row + dtime, x);
    }
    targets(i - 1) = r.values(target_row, x_star);
  }

  auto slice = [&](Eigen::Index first_i, Eigen::Index count, SplitRole role) {
    FeatureSet f;
    f.position = x_star;
    f.role = role;
    f.inputs = inputs.middleRows(first_i - 1, count);
    f.targets = targets.segment(first_i - 1, count);
    f.time_indices.resize(count);
    for (Eigen::Index k = 0; k < count; ++k) f.time_indices[k] = first_i + k;
    return f;
  };

  PositionFeatures out;
  out.train = slice(1, plan.m, SplitRole::train);
  out.validation = slice(plan.m + 1, plan.n_val, SplitRole::validation);
  out.test = slice(plan.m + 1 + plan.n_val, n_total - plan.m - plan.n_val, SplitRole::test);
  return out;
}

namespace {

json plan_to_json(const EmbeddingPlan& plan) {
  json j;
  j["p"] = plan.p;
  j["c"] = plan.c;
  j["lambda"] = plan.lambda;
  j["a"] = plan.a;
  j["epsilon"] = plan.epsilon;
  j["delta"] = plan.delta;
  j["n_test"] = plan.n_test;
  j["n_val"] = plan.n_val;
  j["m"] = plan.m;
  j["D"] = plan.D;
  j["N"] = plan.N;
  j["positions_used"] = plan.positions_used;
  return j;
}

EmbeddingPlan plan_from_json(const json& j) {
  EmbeddingPlan plan;
  plan.p = j.at("p").get<int>();
  plan.c = j.at("c").get<double>();
  plan.lambda = j.at("lambda").get<double>();
  plan.a = j.at("a").get<int>();
  plan.epsilon = j.at("epsilon").get<double>();
  plan.delta = j.at("delta").get<double>();
  plan.n_test = j.at("n_test").get<Eigen::Index>();
  plan.n_val = j.at("n_val").get<Eigen::Index>();
  plan.m = j.at("m").get<Eigen::Index>();
  plan.D = j.at("D").get<int>();
  plan.N = j.at("N").get<Eigen::Index>();
  plan.positions_used = j.at("positions_used").get<std::vector<Eigen::Index>>();
  return plan;
}

void save_feature_set(const fs::path& path, const FeatureSet& f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write feature file: " + path.string());
  out << "i";
  for (Eigen::Index d = 0; d < f.inputs.cols(); ++d) out << ",x" << (d + 1);
  out << ",y\n";
  for (Eigen::Index r = 0; r < f.inputs.rows(); ++r) {
    out << f.time_indices[r];
    for (Eigen::Index d = 0; d < f.inputs.cols(); ++d) out << ',' << format_double(f.inputs(r, d));
    out << ',' << format_double(f.targets(r)) << "\n";
  }
}

FeatureSet load_feature_set(const fs::path& path, Eigen::Index position, SplitRole role,
                            int D) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feature file: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  std::vector<Eigen::Index> idx;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string tok = line.substr(start, comma == std::string::npos ? comma : comma - start);
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc()) throw ConfigError("bad value in " + path.string());
      vals.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(vals.size()) != D + 2)
      throw ConfigError("feature row width mismatch in " + path.string());
    idx.push_back(static_cast<Eigen::Index>(vals[0]));
    rows.push_back(vals);
  }
  FeatureSet f;
  f.position = position;
  f.role = role;
  f.time_indices = idx;
  f.inputs.resize(static_cast<Eigen::Index>(rows.size()), D);
  f.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int d = 0; d < D; ++d) f.inputs(static_cast<Eigen::Index>(r), d) = rows[r][d + 1];
    f.targets(static_cast<Eigen::Index>(r)) = rows[r][D + 1];
  }
  return f;
}

}  // namespace

void save_features(const std::string& dir, const FeatureBundle& bundle) {
  fs::create_directories(dir);
  std::ofstream pj(fs::path(dir) / "plan.json");
  pj << plan_to_json(bundle.plan).dump(2) << "\n";
  if (bundle.per_position.size() != bundle.plan.positions_used.size())
    throw ConfigError("feature bundle does not match plan positions");
  for (std::size_t k = 0; k < bundle.per_position.size(); ++k) {
    const auto pos = bundle.plan.positions_used[k];
    const auto& pf = bundle.per_position[k];
    const std::string stem = "pos" + std::to_string(pos) + "_";
    save_feature_set(fs::path(dir) / (stem + "train.csv"), pf.train);
    save_feature_set(fs::path(dir) / (stem + "validation.csv"), pf.validation);
    save_feature_set(fs::path(dir) / (stem + "test.csv"), pf.test);
  }
}

FeatureBundle load_features(const std::string& dir) {
  std::ifstream pj(fs::path(dir) / "plan.json");
  if (!pj) throw ConfigError("cannot open plan.json in " + dir);
  json j = json::parse(pj);
  FeatureBundle bundle;
  bundle.plan = plan_from_json(j);
  for (auto pos : bundle.plan.positions_used) {
    const std::string stem = "pos" + std::to_string(pos) + "_";
    PositionFeatures pf;
    pf.train = load_feature_set(fs::path(dir) / (stem + "train.csv"), pos, SplitRole::train,
                                bundle.plan.D);
    pf.validation = load_feature_set(fs::path(dir) / (stem + "validation.csv"), pos,
                                     SplitRole::validation, bundle.plan.D);
    pf.test =
        load_feature_set(fs::path(dir) / (stem + "test.csv"), pos, SplitRole::test, bundle.plan.D);
    bundle.per_position.push_back(std::move(pf));
  }
  return bundle;
}

}  // namespace stouf
