#include "stouf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace stouf {

using nlohmann::json;

double crps(const Eigen::VectorXd& members, double y) {
  const Eigen::Index J = members.size();
  if (J < 1) throw ConfigError("crps needs at least one member");
  std::vector<double> x(members.data(), members.data() + J);
  std::sort(x.begin(), x.end());
  double term1 = 0.0, term2 = 0.0;
  for (Eigen::Index i = 0; i < J; ++i) {
    term1 += std::abs(x[static_cast<std::size_t>(i)] - y);
    // sum_{j,k} |x_j - x_k| = 2 sum_i (2i + 1 - J) x_(i) for sorted x
    term2 += (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(J)) *
             x[static_cast<std::size_t>(i)];
  }
  const double dJ = static_cast<double>(J);
  return term1 / dJ - term2 / (dJ * dJ);
}

double rmse(const EnsembleForecast& ef, Eigen::Index position_index) {
  const auto& m = ef.members[static_cast<std::size_t>(position_index)];
  double sum = 0.0;
  for (Eigen::Index h = 0; h < m.cols(); ++h)
    sum += (m.col(h).array() - ef.observations(h, position_index)).square().mean();
  return std::sqrt(sum / static_cast<double>(m.cols()));
}

double pit(const Eigen::VectorXd& members, double y, RandomStream& rng) {
  const Eigen::Index J = members.size();
  if (J < 1) throw ConfigError("pit needs at least one member");
  Eigen::Index below = 0, equal = 0;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (members(j) < y) ++below;
    else if (members(j) == y) ++equal;
  }
  const double u = rng.uniform();
  return (static_cast<double>(below) + u * (1.0 + static_cast<double>(equal))) /
         static_cast<double>(J + 1);
}

double interp_quantile(Eigen::VectorXd values, double q) {
  const Eigen::Index n = values.size();
  if (n < 1) throw ConfigError("quantile of empty sample");
  std::sort(values.data(), values.data() + n);
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return values(lo) + frac * (values(hi) - values(lo));
}

EvaluationReport evaluate(const EnsembleForecast& ef, std::uint64_t pit_seed, int pit_bins,
                          const std::vector<double>& levels) {
  ef.validate();
  const int H = ef.H();
  const Eigen::Index R = static_cast<Eigen::Index>(ef.positions.size());

  EvaluationReport rep;
  rep.positions = ef.positions;
  rep.crps_table.resize(H + 1, R);
  rep.pit_values.resize(H + 1, R);
  rep.pit_histogram.assign(static_cast<std::size_t>(pit_bins), 0);
  rep.coverage_levels = levels;
  rep.coverage_observed.assign(levels.size(), 0.0);

  RandomStream pit_rng(derive_seed(pit_seed, stage::pit));
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto& m = ef.members[static_cast<std::size_t>(r)];
    double crps_sum = 0.0;
    for (int h = 0; h <= H; ++h) {
      const double y = ef.observations(h, r);
      rep.crps_table(h, r) = crps(m.col(h), y);
      crps_sum += rep.crps_table(h, r);
      const double p = pit(m.col(h), y, pit_rng);
      rep.pit_values(h, r) = p;
      const int bin = std::min(pit_bins - 1, static_cast<int>(p * pit_bins));
      ++rep.pit_histogram[static_cast<std::size_t>(bin)];
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const double half = levels[l] / 100.0 / 2.0;
        const double qlo = interp_quantile(m.col(h), 0.5 - half);
        const double qhi = interp_quantile(m.col(h), 0.5 + half);
        if (y >= qlo && y <= qhi) rep.coverage_observed[l] += 1.0;
      }
    }
    rep.crps_per_pos.push_back(crps_sum / static_cast<double>(H + 1));
    rep.rmse_per_pos.push_back(rmse(ef, r));
  }
  const double cases = static_cast<double>((H + 1) * R);
  for (auto& c : rep.coverage_observed) c /= cases;
  double cm = 0.0, rm = 0.0;
  for (Eigen::Index r = 0; r < R; ++r) {
    cm += rep.crps_per_pos[static_cast<std::size_t>(r)];
    rm += rep.rmse_per_pos[static_cast<std::size_t>(r)];
  }
  rep.crps_mean = cm / static_cast<double>(R);
  rep.rmse_mean = rm / static_cast<double>(R);
  return rep;
}

void save_report(const std::string& path, const EvaluationReport& report) {
  json j;
  j["positions"] = report.positions;
  j["crps_mean"] = report.crps_mean;
  j["crps_per_position"] = report.crps_per_pos;
  j["rmse_mean"] = report.rmse_mean;
  j["rmse_per_position"] = report.rmse_per_pos;
  json tbl = json::array();
  for (Eigen::Index h = 0; h < report.crps_table.rows(); ++h) {
    json row = json::array();
    for (Eigen::Index r = 0; r < report.crps_table.cols(); ++r)
      row.push_back(report.crps_table(h, r));
    tbl.push_back(row);
  }
  j["crps_table"] = tbl;
  j["pit_histogram"] = report.pit_histogram;
  j["coverage_levels"] = report.coverage_levels;
  j["coverage_observed"] = report.coverage_observed;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report file: " + path);
  out << j.dump(2) << "\n";
}

void save_plot_data(const std::string& dir, const EnsembleForecast& ef,
                    const EvaluationReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "pit_histogram.csv");
    out << "bin,count\n";
    for (std::size_t b = 0; b < report.pit_histogram.size(); ++b)
      out << b << ',' << report.pit_histogram[b] << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "coverage.csv");
    out << "level_percent,nominal,observed\n";
    for (std::size_t l = 0; l < report.coverage_levels.size(); ++l)
      out << format_double(report.coverage_levels[l]) << ','
          << format_double(report.coverage_levels[l] / 100.0) << ','
          << format_double(report.coverage_observed[l]) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "quantile_bands.csv");
    out << "position,horizon,q05,q25,q50,q75,q95,observation\n";
    for (std::size_t r = 0; r < ef.members.size(); ++r)
      for (int h = 0; h <= ef.H(); ++h) {
        const auto& col = ef.members[r].col(h);
        out << ef.positions[r] << ',' << h;
        for (double q : {0.05, 0.25, 0.5, 0.75, 0.95})
          out << ',' << format_double(interp_quantile(col, q));
        out << ',' << format_double(ef.observations(h, static_cast<Eigen::Index>(r))) << "\n";
      }
  }
}

}  // namespace stouf
