#include "stouf/raster.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace stouf {

namespace {

double parse_cell(const std::string& tok, Eigen::Index row, Eigen::Index col) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v)) {
    throw ConfigError("non-numeric cell at row " + std::to_string(row) + ", column " +
                      std::to_string(col) + ": '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void RasterSeries::validate() const {
  const Eigen::Index N = values.rows(), P = values.cols();
  if (N < 1 || P < 1) throw ConfigError("raster must have at least one row and one column");
  if (static_cast<Eigen::Index>(positions.size()) != P)
    throw ConfigError("positions length does not match column count");
  if (!(h_t > 0.0)) throw ConfigError("sampling step h_t must be positive");
  if (!values.allFinite()) throw ConfigError("raster contains non-finite values");
  if (P >= 2) {
    const double dx = positions[1] - positions[0];
    if (!(dx > 0.0)) throw ConfigError("non-uniform grid: positions must be strictly increasing");
    for (Eigen::Index j = 1; j < P; ++j) {
      const double step = positions[j] - positions[j - 1];
      if (!(step > 0.0) || std::abs(step - dx) > 1e-9 * std::max(1.0, std::abs(dx)))
        throw ConfigError("non-uniform grid: spacing changes at position column " +
                          std::to_string(j));
    }
  }
}

DetrendMode detrend_mode_from_string(const std::string& s) {
  if (s == "none") return DetrendMode::none;
  if (s == "per_position_mean") return DetrendMode::per_position_mean;
  if (s == "global_mean") return DetrendMode::global_mean;
  throw ConfigError("unknown detrend mode: " + s);
}

std::string to_string(DetrendMode mode) {
  switch (mode) {
    case DetrendMode::none: return "none";
    case DetrendMode::per_position_mean: return "per_position_mean";
    case DetrendMode::global_mean: return "global_mean";
  }
  return "none";
}

RasterSeries load_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open raster file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty raster file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "time")
    throw ConfigError("malformed header: expected 'time,pos_<x1>,...' in " + path);

  RasterSeries r;
  for (std::size_t j = 1; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (h.rfind("pos_", 0) != 0)
      throw ConfigError("malformed header: column " + std::to_string(j) +
                        " must be named pos_<coordinate>");
    r.positions.push_back(parse_cell(h.substr(4), 0, static_cast<Eigen::Index>(j)));
  }
  const Eigen::Index P = static_cast<Eigen::Index>(r.positions.size());

  std::vector<double> times;
  std::vector<double> cells;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto toks = split_csv(line);
    if (static_cast<Eigen::Index>(toks.size()) != P + 1)
      throw ConfigError("ragged row " + std::to_string(row) + ": expected " +
                        std::to_string(P + 1) + " fields, got " + std::to_string(toks.size()));
    times.push_back(parse_cell(toks[0], row, 0));
    for (Eigen::Index j = 0; j < P; ++j) cells.push_back(parse_cell(toks[j + 1], row, j + 1));
  }
  const Eigen::Index N = static_cast<Eigen::Index>(times.size());
  if (N < 1) throw ConfigError("raster has no data rows: " + path);

  if (N >= 2) {
    r.h_t = times[1] - times[0];
    if (!(r.h_t > 0.0)) throw ConfigError("time stamps must be strictly increasing (row 2)");
    for (Eigen::Index i = 1; i < N; ++i) {
      const double step = times[i] - times[i - 1];
      if (!(step > 0.0) || std::abs(step - r.h_t) > 1e-9 * std::max(1.0, std::abs(r.h_t)))
        throw ConfigError("non-uniform time sampling at row " + std::to_string(i + 1));
    }
  } else {
    r.h_t = 1.0;
  }
  r.t0 = times[0] - r.h_t;

  r.values.resize(N, P);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < P; ++j) r.values(i, j) = cells[i * P + j];

  r.name = path;
  r.validate();
  return r;
}

void save_raster(const RasterSeries& r, const std::string& path) {
  r.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write raster file: " + path);
  out << "time";
  for (double x : r.positions) out << ",pos_" << format_double(x);
  out << "\n";
  for (Eigen::Index i = 0; i < r.n_times(); ++i) {
    out << format_double(r.time_of_row(i));
    for (Eigen::Index j = 0; j < r.n_positions(); ++j) out << ',' << format_double(r.values(i, j));
    out << "\n";
  }
  if (!out) throw ConfigError("write failed: " + path);
}

std::pair<RasterSeries, DetrendInfo> detrend(const RasterSeries& r, DetrendMode mode) {
  r.validate();
  RasterSeries out = r;
  DetrendInfo info;
  info.mode = mode;
  info.removed = Eigen::VectorXd::Zero(r.n_positions());
  switch (mode) {
    case DetrendMode::none:
      break;
    case DetrendMode::per_position_mean:
      info.removed = r.values.colwise().mean().transpose();
      out.values.rowwise() -= info.removed.transpose();
      break;
    case DetrendMode::global_mean:
      info.removed.setConstant(r.values.mean());
      out.values.array() -= info.removed(0);
      break;
  }
  return {std::move(out), std::move(info)};
}

}  // namespace stouf
