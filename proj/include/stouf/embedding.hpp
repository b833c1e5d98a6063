#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stouf/raster.hpp"

namespace stouf {

// Per-position cone index template and split sizes for feature extraction.
struct EmbeddingPlan {
  int p = 1;               // past depth
  double c = 1.0;          // speed of information propagation (estimated)
  double lambda = 0.0;     // dependence decay rate used to select a
  int a = 0;               // stride between consecutive targets
  double epsilon = 3.0;    // accuracy level
  double delta = 0.025;    // confidence level
  Eigen::Index n_test = 0;
  Eigen::Index n_val = 1;  // fixed to one example
  Eigen::Index m = 0;      // training examples
  int D = 0;               // input dimension for interior positions
  Eigen::Index N = 0;      // raster length the plan was built for
  std::vector<Eigen::Index> positions_used;  // interior position indices

  void validate() const;
};

enum class SplitRole { train, validation, test };

std::string to_string(SplitRole role);
SplitRole split_role_from_string(const std::string& s);

struct FeatureSet {
  Eigen::Index position = 0;
  Eigen::MatrixXd inputs;   // count x D, lex-ordered columns
  Eigen::VectorXd targets;  // count
  SplitRole role = SplitRole::train;
  std::vector<Eigen::Index> time_indices;  // the i values, chronological
};

struct PositionFeatures {
  FeatureSet train;
  FeatureSet validation;
  FeatureSet test;
};

struct FeatureBundle {
  EmbeddingPlan plan;
  std::vector<PositionFeatures> per_position;  // one entry per positions_used
};

// Smallest a >= p+1 with exp(-lambda (a-p)) <= delta / (2 m(a) epsilon) and
// m(a) = floor(N/a) - n_test - 1 >= 1. Returns (a, m).
std::pair<int, Eigen::Index> select_a(double lambda, int p, double epsilon, double delta,
                                      Eigen::Index N, Eigen::Index n_test);

// Cone offsets {(-tau, x_s)} for 1 <= tau <= p and |x_star - x_s| <= c*tau,
// sorted lexicographically by (time offset, position).
std::vector<std::pair<int, Eigen::Index>> build_index_template(Eigen::Index x_star, double c,
                                                               int p, Eigen::Index P);

// Interior positions: those whose full cone template stays on the grid.
std::vector<Eigen::Index> interior_positions(double c, int p, Eigen::Index P);

int input_dimension(double c, int p);

EmbeddingPlan make_plan(double c, double lambda, int p, double epsilon, double delta,
                        Eigen::Index n_test, Eigen::Index N, Eigen::Index P,
                        int forced_a = 0);

PositionFeatures extract_features(const RasterSeries& r, const EmbeddingPlan& plan,
                                  Eigen::Index x_star);

void save_features(const std::string& dir, const FeatureBundle& bundle);
FeatureBundle load_features(const std::string& dir);

}  // namespace stouf
