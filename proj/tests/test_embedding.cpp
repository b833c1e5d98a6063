#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stouf/embedding.hpp"
#include "stouf/rng.hpp"

using namespace stouf;

TEST_CASE("stride selection reproduces the OLR setup") {
  auto [a, m] = select_a(0.144, 1, 3.0, 0.025, 3520, 18);
  CHECK(a == 64);
  CHECK(m == 36);
}

TEST_CASE("stride selection floor binds for fast decay") {
  auto [a, m] = select_a(100.0, 1, 3.0, 0.025, 100, 1);
  CHECK(a == 2);
  CHECK(m == 48);
}

TEST_CASE("stride selection matches an exhaustive scan") {
  RandomStream rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const double lambda = 0.05 + rng.uniform();
    const int p = 1 + static_cast<int>(rng.uniform() * 3);
    const double eps = 0.5 + 5.0 * rng.uniform();
    const double delta = 0.01 + 0.2 * rng.uniform();
    const Eigen::Index N = 500 + static_cast<Eigen::Index>(rng.uniform() * 5000);
    const Eigen::Index n_test = static_cast<Eigen::Index>(rng.uniform() * 10);

    int brute_a = -1;
    Eigen::Index brute_m = 0;
    for (Eigen::Index a = p + 1; a <= N; ++a) {
      const Eigen::Index m = N / a - n_test - 1;
      if (m < 1) break;
      if (std::exp(-lambda * static_cast<double>(a - p)) <=
          delta / (2.0 * static_cast<double>(m) * eps)) {
        brute_a = static_cast<int>(a);
        brute_m = m;
        break;
      }
    }
    if (brute_a < 0) {
      CHECK_THROWS_AS(select_a(lambda, p, eps, delta, N, n_test), ConfigError);
    } else {
      auto [a, m] = select_a(lambda, p, eps, delta, N, n_test);
      CHECK(a == brute_a);
      CHECK(m == brute_m);
    }
  }
}

TEST_CASE("infeasible series reports decay error") {
  CHECK_THROWS_WITH_AS(select_a(0.001, 1, 3.0, 0.025, 200, 1),
                       doctest::Contains("series too short"), ConfigError);
}

TEST_CASE("index template geometry") {
  using Off = std::pair<int, Eigen::Index>;
  auto t1 = build_index_template(5, 1.0, 1, 11);
  CHECK(t1 == std::vector<Off>{{-1, 4}, {-1, 5}, {-1, 6}});
  CHECK(input_dimension(1.0, 1) == 3);

  auto t2 = build_index_template(5, 4.853, 1, 11);
  CHECK(t2.size() == 9);  // 2*floor(4.853)+1
  CHECK(input_dimension(4.853, 1) == 9);

  auto t3 = build_index_template(5, 0.5, 1, 11);
  CHECK(t3 == std::vector<Off>{{-1, 5}});

  CHECK_THROWS_WITH_AS(build_index_template(0, 1.0, 1, 11),
                       doctest::Contains("cone exceeds raster"), ConfigError);

  // lexicographic (time, position) order with p = 2
  auto t4 = build_index_template(5, 1.0, 2, 11);
  CHECK(t4 == std::vector<Off>{{-2, 3}, {-2, 4}, {-2, 5}, {-2, 6}, {-2, 7},
                               {-1, 4}, {-1, 5}, {-1, 6}});
}

TEST_CASE("interior positions exclude boundaries") {
  auto pos = interior_positions(1.0, 1, 10);
  CHECK(pos.size() == 8);  // matches "8 of which are used" out of 10
  CHECK(pos.front() == 1);
  CHECK(pos.back() == 8);
  CHECK(interior_positions(10.0, 1, 5).empty());
}

TEST_CASE("feature extraction on the linear-in-time field") {
  RasterSeries r;
  const Eigen::Index N = 30, P = 3;
  r.values.resize(N, P);
  for (Eigen::Index i = 0; i < N; ++i)
    r.values.row(i).setConstant(r.time_of_row(i));  // Z_t(x) = t
  r.positions = {0, 1, 2};

  EmbeddingPlan plan;
  plan.p = 1;
  plan.c = 1.0;
  plan.lambda = 1.0;
  plan.a = 3;
  plan.n_test = 2;
  plan.N = N;
  plan.m = N / plan.a - plan.n_test - 1;  // 7
  plan.D = 3;
  plan.positions_used = {1};

  const auto pf = extract_features(r, plan, 1);
  CHECK(pf.train.inputs.rows() == 7);
  CHECK(pf.validation.inputs.rows() == 1);
  CHECK(pf.test.inputs.rows() == 2);
  for (Eigen::Index k = 0; k < pf.train.inputs.rows(); ++k) {
    const double i = static_cast<double>(k + 1);
    CHECK(pf.train.targets(k) == 3.0 * i);
    for (int d = 0; d < 3; ++d) CHECK(pf.train.inputs(k, d) == 3.0 * i - 1.0);
  }
  CHECK(pf.validation.targets(0) == 3.0 * 8);
  CHECK(pf.test.targets(1) == 3.0 * 10);

  // non-anticipation and stride invariants
  CHECK(pf.train.time_indices.front() == 1);
  CHECK(pf.test.time_indices.back() == 10);
}

TEST_CASE("GAU-scale split arithmetic") {
  EmbeddingPlan plan;
  plan.N = 1000000;
  plan.a = 8;
  plan.n_test = 100;
  CHECK(plan.N / plan.a - plan.n_test - plan.n_val == 124899);
}

TEST_CASE("make_plan wires estimation outputs through") {
  auto plan = make_plan(1.0, 0.5, 1, 3.0, 0.025, 4, 600, 10);
  CHECK(plan.a >= 2);
  CHECK(plan.m == 600 / plan.a - 5);
  CHECK(plan.D == 3);
  CHECK(plan.positions_used.size() == 8);
  plan.validate();

  auto forced = make_plan(1.0, 0.5, 1, 3.0, 0.025, 4, 600, 10, 30);
  CHECK(forced.a == 30);
  CHECK(forced.m == 15);
}

TEST_CASE("feature bundle round trip") {
  RasterSeries r;
  r.values.resize(60, 5);
  RandomStream rng(3);
  for (Eigen::Index i = 0; i < r.values.size(); ++i) r.values(i / 5, i % 5) = rng.gaussian();
  r.positions = {0, 1, 2, 3, 4};

  FeatureBundle fb;
  fb.plan = make_plan(1.2, 0.8, 1, 3.0, 0.025, 2, 60, 5);
  for (auto pos : fb.plan.positions_used)
    fb.per_position.push_back(extract_features(r, fb.plan, pos));

  const auto dir = (std::filesystem::temp_directory_path() / "stouf_feat_rt").string();
  save_features(dir, fb);
  const auto back = load_features(dir);
  CHECK(back.plan.a == fb.plan.a);
  CHECK(back.plan.m == fb.plan.m);
  CHECK(back.plan.positions_used == fb.plan.positions_used);
  for (std::size_t k = 0; k < fb.per_position.size(); ++k) {
    CHECK(back.per_position[k].train.inputs == fb.per_position[k].train.inputs);
    CHECK(back.per_position[k].train.targets == fb.per_position[k].train.targets);
    CHECK(back.per_position[k].test.inputs == fb.per_position[k].test.inputs);
    CHECK(back.per_position[k].validation.targets == fb.per_position[k].validation.targets);
    CHECK(back.per_position[k].train.time_indices == fb.per_position[k].train.time_indices);
  }
}
