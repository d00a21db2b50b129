#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "otafl/data.hpp"
#include "otafl/learning.hpp"
#include "otafl/rng.hpp"

using namespace otafl;

namespace {

Dataset regression_data(std::initializer_list<double> xs,
                        std::initializer_list<double> ys) {
  Dataset d;
  d.n = xs.size();
  d.in_dim = 1;
  d.out_dim = 1;
  d.inputs = xs;
  d.targets = ys;
  return d;
}

Dataset random_mlp_data(std::size_t n, Rng& rng) {
  Dataset d;
  d.n = n;
  d.in_dim = TaskModel::kMlpIn;
  d.out_dim = TaskModel::kMlpOut;
  d.inputs.resize(n * d.in_dim);
  d.targets.assign(n * d.out_dim, 0.0);
  for (auto& v : d.inputs) v = rng.uniform01();
  for (std::size_t k = 0; k < n; ++k)
    d.targets[k * 10 + static_cast<std::size_t>(rng.uniform_int(0, 9))] = 1.0;
  return d;
}

// Central finite difference of the loss along direction v.
double directional_fd(const ModelParams& w, const TaskModel& task,
                      const Dataset& data, const ModelParams& v, double eps) {
  ModelParams plus = w, minus = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    plus[i] += eps * v[i];
    minus[i] -= eps * v[i];
  }
  return (local_loss(plus, task, data) - local_loss(minus, task, data)) /
         (2.0 * eps);
}

double dot(const ModelParams& a, const ModelParams& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("regression loss vanishes on an exact fit") {
  const auto task = TaskModel::linear_regression();
  const auto data = regression_data({0.0, 0.5, 1.0}, {1.0, 0.0, -1.0});
  REQUIRE(local_loss({-2.0, 1.0}, task, data) == 0.0);
}

TEST_CASE("regression loss on a single miss is the squared residual") {
  const auto task = TaskModel::linear_regression();
  const auto data = regression_data({0.0}, {1.0});
  REQUIRE(local_loss({0.0, 0.0}, task, data) == 1.0);
}

TEST_CASE("uniform classifier output costs ln(10)") {
  const auto task = TaskModel::mlp();
  Rng rng(5);
  const auto data = random_mlp_data(4, rng);
  ModelParams zero(static_cast<std::size_t>(task.dim()), 0.0);
  REQUIRE_THAT(local_loss(zero, task, data),
               Catch::Matchers::WithinRel(std::log(10.0), 1e-12));

  const auto model = init_model(task, rng);
  REQUIRE(local_loss(model, task, data) >= 0.0);
}

TEST_CASE("gradient vanishes at the least-squares optimum") {
  const auto task = TaskModel::linear_regression();
  Rng rng(11);
  SyntheticRegressionSpec spec;
  const auto data = gen_synthetic_pool(spec, 200, rng);
  const auto fit = least_squares_fit(data);
  const auto g = local_gradient(fit.params, task, data);
  REQUIRE(std::abs(g[0]) < 1e-10);
  REQUIRE(std::abs(g[1]) < 1e-10);
}

TEST_CASE("gradient matches central finite differences on both tasks") {
  constexpr double kEps = 1e-5;
  constexpr double kTol = 1e-4;

  SECTION("regression") {
    const auto task = TaskModel::linear_regression();
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      SyntheticRegressionSpec spec;
      const auto data = gen_synthetic_pool(spec, 30, rng);
      ModelParams w = {rng.normal(), rng.normal()};
      ModelParams v = {rng.normal(), rng.normal()};
      const double norm = std::sqrt(dot(v, v));
      for (auto& x : v) x /= norm;
      const double analytic = dot(local_gradient(w, task, data), v);
      const double numeric = directional_fd(w, task, data, v, kEps);
      REQUIRE_THAT(analytic, Catch::Matchers::WithinRel(numeric, kTol));
    }
  }

  SECTION("classifier") {
    const auto task = TaskModel::mlp();
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
      const auto data = random_mlp_data(5, rng);
      ModelParams w = init_model(task, rng);
      ModelParams v(w.size());
      for (auto& x : v) x = rng.normal();
      const double norm = std::sqrt(dot(v, v));
      for (auto& x : v) x /= norm;
      const double analytic = dot(local_gradient(w, task, data), v);
      const double numeric = directional_fd(w, task, data, v, kEps);
      REQUIRE_THAT(analytic, Catch::Matchers::WithinRel(numeric, kTol));
    }
  }
}

TEST_CASE("all-zero classifier weights keep the hidden layer gradient at zero") {
  const auto task = TaskModel::mlp();
  Rng rng(31);
  const auto data = random_mlp_data(3, rng);
  ModelParams zero(static_cast<std::size_t>(task.dim()), 0.0);
  const auto g = local_gradient(zero, task, data);
  for (int i = TaskModel::kW1; i < TaskModel::kW2; ++i) REQUIRE(g[i] == 0.0);
  // the output biases still move toward the labels
  double bias_mass = 0.0;
  for (int i = TaskModel::kB2; i < TaskModel::kMlpDim; ++i)
    bias_mass += std::abs(g[i]);
  REQUIRE(bias_mass > 0.0);
}

TEST_CASE("local update is a fixed point at a stationary model") {
  const auto task = TaskModel::linear_regression();
  Rng rng(41);
  SyntheticRegressionSpec spec;
  const auto data = gen_synthetic_pool(spec, 100, rng);
  const auto fit = least_squares_fit(data);
  const auto stepped = local_update(fit.params, task, data, 0.5);
  REQUIRE_THAT(stepped[0], Catch::Matchers::WithinAbs(fit.params[0], 1e-10));
  REQUIRE_THAT(stepped[1], Catch::Matchers::WithinAbs(fit.params[1], 1e-10));
}

TEST_CASE("unit learning rate subtracts the gradient exactly") {
  const auto task = TaskModel::linear_regression();
  const auto data = regression_data({0.5, 1.0}, {2.0, -1.0});
  const ModelParams w = {0.3, -0.7};
  const auto g = local_gradient(w, task, data);
  const auto next = local_update(w, task, data, 1.0);
  REQUIRE(next[0] == w[0] - g[0]);
  REQUIRE(next[1] == w[1] - g[1]);
}

TEST_CASE("one small step decreases the loss from a non-stationary start") {
  const auto task = TaskModel::linear_regression();
  Rng rng(51);
  SyntheticRegressionSpec spec;
  const auto data = gen_synthetic_pool(spec, 120, rng);
  const ModelParams w = {0.0, 0.0};
  const double before = local_loss(w, task, data);
  const double after = local_loss(local_update(w, task, data, 0.01), task, data);
  REQUIRE(after < before);
}

TEST_CASE("aggregation fixed points and weighted means") {
  const std::vector<std::int64_t> even = {1, 1};
  std::vector<ModelParams> consensus = {{0.3, -0.2}, {0.3, -0.2}};
  auto agg = ideal_global_aggregate(consensus, even);
  REQUIRE(agg == consensus[0]);

  std::vector<ModelParams> pair = {{0.0, 0.0}, {2.0, 2.0}};
  agg = ideal_global_aggregate(pair, even);
  REQUIRE(agg == ModelParams{1.0, 1.0});

  const std::vector<std::int64_t> skew = {1, 3};
  std::vector<ModelParams> scalars = {{4.0}, {0.0}};
  agg = ideal_global_aggregate(scalars, skew);
  REQUIRE(agg == ModelParams{1.0});
}

TEST_CASE("aggregation is permutation invariant and degree-1 homogeneous") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int u = static_cast<int>(rng.uniform_int(2, 6));
    std::vector<ModelParams> locals;
    std::vector<std::int64_t> weights;
    for (int i = 0; i < u; ++i) {
      locals.push_back({rng.normal(), rng.normal(), rng.normal()});
      weights.push_back(rng.uniform_int(1, 50));
    }
    const auto base = ideal_global_aggregate(locals, weights);

    std::vector<std::size_t> perm(static_cast<std::size_t>(u));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = perm.size(); k > 1; --k)
      std::swap(perm[k - 1],
                perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1))]);
    std::vector<ModelParams> shuffled;
    std::vector<std::int64_t> shuffled_w;
    for (auto p : perm) {
      shuffled.push_back(locals[p]);
      shuffled_w.push_back(weights[p]);
    }
    const auto permuted = ideal_global_aggregate(shuffled, shuffled_w);
    for (std::size_t d = 0; d < base.size(); ++d)
      REQUIRE_THAT(permuted[d], Catch::Matchers::WithinAbs(base[d], 1e-12));

    const double c = 2.5;
    std::vector<ModelParams> scaled = locals;
    for (auto& l : scaled)
      for (auto& v : l) v *= c;
    const auto scaled_agg = ideal_global_aggregate(scaled, weights);
    for (std::size_t d = 0; d < base.size(); ++d)
      REQUIRE_THAT(scaled_agg[d],
                   Catch::Matchers::WithinAbs(c * base[d], 1e-12));
  }
}

TEST_CASE("empty aggregation is rejected") {
  std::vector<ModelParams> none;
  std::vector<std::int64_t> weights;
  REQUIRE_THROWS_AS(ideal_global_aggregate(none, weights), AggregationError);
}

TEST_CASE("ideal descent at alpha = 1/L never increases the loss") {
  const auto task = TaskModel::linear_regression();
  Rng rng(71);
  SyntheticRegressionSpec spec;
  const auto data = gen_synthetic_pool(spec, 300, rng);
  const auto curv = regression_curvature_bounds(data);
  REQUIRE(curv.strong_convexity > 0.0);
  REQUIRE(curv.strong_convexity <= curv.lipschitz);

  ModelParams w = {0.0, 0.0};
  double prev = local_loss(w, task, data);
  for (int t = 0; t < 50; ++t) {
    w = local_update(w, task, data, 1.0 / curv.lipschitz);
    const double now = local_loss(w, task, data);
    REQUIRE(now <= prev + 1e-15);
    prev = now;
  }
}

TEST_CASE("shape mismatches are rejected") {
  const auto task = TaskModel::linear_regression();
  const auto data = regression_data({0.0}, {1.0});
  REQUIRE_THROWS_AS(local_loss({1.0, 2.0, 3.0}, task, data), ShapeError);
  REQUIRE_THROWS_AS(local_gradient({1.0}, task, data), ShapeError);
}
