#include "stouf/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace stouf {

void EnsembleForecast::validate() const {
  if (members.size() != positions.size() ||
      observations.cols() != static_cast<Eigen::Index>(positions.size()))
    throw ConfigError("ensemble shape mismatch");
  if (J() < 2) throw ConfigError("ensemble needs J >= 2 members");
  for (const auto& m : members)
    if (m.rows() != J() || m.cols() != H() + 1) throw ConfigError("ragged ensemble members");
  if (observations.rows() != H() + 1) throw ConfigError("observation rows must equal H+1");
}

PositionHistory concat_history(const PositionFeatures& pf, const EmbeddingPlan& plan,
                               const RasterSeries* raster) {
  const Eigen::Index n = pf.train.inputs.rows() + pf.validation.inputs.rows() +
                         pf.test.inputs.rows();
  PositionHistory h;
  h.position = pf.train.position;
  h.inputs.resize(n, plan.D);
  h.targets.resize(n);
  h.inputs << pf.train.inputs, pf.validation.inputs, pf.test.inputs;
  h.targets << pf.train.targets, pf.validation.targets, pf.test.targets;
  h.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index row = (k + 1) * plan.a - 1;  // targeted raster row
    h.times[static_cast<std::size_t>(k)] =
        raster ? raster->time_of_row(row) : static_cast<double>(row + 1);
  }
  return h;
}

EnsembleForecast generate_ensemble(const std::vector<PositionModel>& models,
                                   const std::vector<PositionHistory>& histories,
                                   Eigen::Index start, int H, int J, RandomStream& rng) {
  if (models.size() != histories.size() || models.empty())
    throw ConfigError("need one model per position");
  if (J < 2) throw ConfigError("ensemble needs J >= 2 members");
  if (H < 0) throw ConfigError("horizon must be >= 0");
  const Eigen::Index R = static_cast<Eigen::Index>(models.size());

  EnsembleForecast ef;
  ef.start = start;
  ef.observations.resize(H + 1, R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto& hist = histories[static_cast<std::size_t>(r)];
    const auto& model = models[static_cast<std::size_t>(r)];
    if (hist.inputs.cols() != model.arch.input_dim)
      throw ConfigError("posterior/feature architecture mismatch");
    if (start < 1 || start + H > hist.inputs.rows())
      throw ConfigError("forecast horizon out of range");
    Eigen::MatrixXd vals(J, H + 1);
    for (int j = 0; j < J; ++j) {
      const ThetaDraw draw = sample_theta(model.rho, rng);  // one draw per member
      for (int h = 0; h <= H; ++h)
        vals(j, h) = forward(model.arch, draw.theta,
                             hist.inputs.row(start - 1 + h).transpose());
    }
    ef.members.push_back(std::move(vals));
    ef.positions.push_back(hist.position);
    for (int h = 0; h <= H; ++h) ef.observations(h, r) = hist.targets(start - 1 + h);
    if (r == 0) {
      ef.times.resize(static_cast<std::size_t>(H + 1));
      for (int h = 0; h <= H; ++h)
        ef.times[static_cast<std::size_t>(h)] =
            hist.times[static_cast<std::size_t>(start - 1 + h)];
    }
  }
  ef.validate();
  return ef;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> causal_footprint(
    Eigen::Index i, const EmbeddingPlan& plan, Eigen::Index x_star, Eigen::Index P,
    Eigen::Index horizon_steps) {
  const auto inputs = build_index_template(x_star, plan.c, plan.p, P);
  const Eigen::Index target_t = i * plan.a;  // time index of the target row
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index t = target_t; t <= target_t + horizon_steps; ++t) {
    for (Eigen::Index x = 0; x < P; ++x) {
      bool inside = true;
      for (const auto& [dt, xs] : inputs) {
        const double elapsed = static_cast<double>(t - (target_t + dt));
        if (std::abs(static_cast<double>(x - xs)) > plan.c * elapsed) {
          inside = false;
          break;
        }
      }
      if (inside) out.emplace_back(t, x);
    }
  }
  const bool has_target =
      std::find(out.begin(), out.end(), std::make_pair(target_t, x_star)) != out.end();
  if (!has_target) throw NumericError("forecast target fell outside its causal footprint");
  return out;
}

void save_ensemble(const std::string& path, const EnsembleForecast& ef) {
  ef.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write ensemble file: " + path);
  out << "# start=" << ef.start << " a=" << ef.a << "\n# times=";
  for (std::size_t h = 0; h < ef.times.size(); ++h)
    out << (h ? "," : "") << format_double(ef.times[h]);
  out << "\nposition,horizon,member,value,observation\n";
  for (std::size_t r = 0; r < ef.members.size(); ++r)
    for (int h = 0; h <= ef.H(); ++h)
      for (int j = 0; j < ef.J(); ++j)
        out << ef.positions[r] << ',' << h << ',' << j << ','
            << format_double(ef.members[r](j, h)) << ','
            << format_double(ef.observations(h, static_cast<Eigen::Index>(r))) << "\n";
}

EnsembleForecast load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ensemble file: " + path);
  EnsembleForecast ef;
  std::string line;
  // (position -> (horizon, member) -> value), plus observations
  std::map<Eigen::Index, std::map<std::pair<int, int>, double>> vals;
  std::map<Eigen::Index, std::map<int, double>> obs;
  int max_h = -1, max_j = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        if (tok.rfind("start=", 0) == 0) ef.start = std::stoll(tok.substr(6));
        else if (tok.rfind("a=", 0) == 0) ef.a = std::stoi(tok.substr(2));
        else if (tok.rfind("times=", 0) == 0) {
          std::istringstream ts(tok.substr(6));
          std::string t;
          while (std::getline(ts, t, ',')) ef.times.push_back(std::stod(t));
        }
      }
      continue;
    }
    if (line.rfind("position,", 0) == 0) continue;  // header
    std::istringstream row(line);
    std::string f[5];
    for (int k = 0; k < 5; ++k)
      if (!std::getline(row, f[k], ',')) throw ConfigError("short ensemble row: " + line);
    const Eigen::Index pos = std::stoll(f[0]);
    const int h = std::stoi(f[1]);
    const int j = std::stoi(f[2]);
    vals[pos][{h, j}] = std::stod(f[3]);
    obs[pos][h] = std::stod(f[4]);
    max_h = std::max(max_h, h);
    max_j = std::max(max_j, j);
  }
  if (vals.empty()) throw ConfigError("empty ensemble file: " + path);
  const int H = max_h, J = max_j + 1;
  ef.observations.resize(H + 1, static_cast<Eigen::Index>(vals.size()));
  Eigen::Index r = 0;
  for (auto& [pos, cells] : vals) {
    Eigen::MatrixXd m(J, H + 1);
    for (int h = 0; h <= H; ++h)
      for (int j = 0; j < J; ++j) {
        auto it = cells.find({h, j});
        if (it == cells.end()) throw ConfigError("missing ensemble cell in " + path);
        m(j, h) = it->second;
      }
    ef.members.push_back(std::move(m));
    ef.positions.push_back(pos);
    for (int h = 0; h <= H; ++h) ef.observations(h, r) = obs[pos][h];
    ++r;
  }
  ef.validate();
  return ef;
}

}  // namespace stouf
