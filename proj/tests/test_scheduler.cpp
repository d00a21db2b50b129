#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "otafl/experiments.hpp"
#include "otafl/scheduler.hpp"

using namespace otafl;

namespace {

struct Instance {
  std::vector<double> gains;
  std::vector<std::int64_t> counts;
  std::vector<double> powers;
  double w = 0.5;
  double eta = 0.1;
  double lipschitz = 1.0;
  double sigma2 = 1e-4;
  double rho1 = 1.0;

  SchedulerInput input() const {
    SchedulerInput in;
    in.prev_global_entry = w;
    in.eta = eta;
    in.gains = gains;
    in.sample_counts = counts;
    in.max_powers_mw = powers;
    in.lipschitz = lipschitz;
    in.noise_variance = sigma2;
    in.rho1 = rho1;
    in.total_samples = static_cast<double>(
        std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
    return in;
  }
};

}  // namespace

TEST_CASE("objective with full selection is pure noise amplification") {
  Instance inst;
  inst.gains = {1.0, 1.0};
  inst.counts = {3, 7};
  inst.powers = {1.0, 1.0};
  inst.lipschitz = 2.0;
  inst.sigma2 = 0.5;
  const auto in = inst.input();
  const std::vector<std::uint8_t> all = {1, 1};
  const double b = 0.25;
  REQUIRE_THAT(objective_R(b, all, in),
               Catch::Matchers::WithinRel(
                   2.0 * 0.5 / (2.0 * (10.0 * b) * (10.0 * b)), 1e-15));
}

TEST_CASE("objective with zero noise is the pure exclusion penalty") {
  Instance inst;
  inst.gains = {1.0, 1.0, 1.0};
  inst.counts = {2, 3, 5};
  inst.powers = {1.0, 1.0, 1.0};
  inst.sigma2 = 0.0;
  inst.rho1 = 0.7;
  inst.lipschitz = 1.5;
  const auto in = inst.input();
  const std::vector<std::uint8_t> beta = {1, 0, 0};
  REQUIRE_THAT(objective_R(2.0, beta, in),
               Catch::Matchers::WithinRel(8.0 * 0.7 / (2.0 * 1.5 * 10.0),
                                          1e-15));
}

TEST_CASE("objective hand-computed value") {
  Instance inst;
  inst.gains = {1.0, 1.0};
  inst.counts = {1, 1};
  inst.powers = {1.0, 1.0};
  inst.lipschitz = 1.0;
  inst.sigma2 = 1.0;
  inst.rho1 = 1.0;
  const auto in = inst.input();
  const std::vector<std::uint8_t> beta = {1, 0};
  REQUIRE(objective_R(1.0, beta, in) == 0.75);
}

TEST_CASE("objective rejects an all-zero selection") {
  Instance inst;
  inst.gains = {1.0};
  inst.counts = {1};
  inst.powers = {1.0};
  const auto in = inst.input();
  const std::vector<std::uint8_t> none = {0};
  REQUIRE_THROWS_AS(objective_R(1.0, none, in), AggregationError);
}

TEST_CASE("maximum acceptable scaling") {
  Instance inst;
  inst.gains = {2.0, 1.0};
  inst.counts = {1, 2};
  inst.powers = {4.0, 1.0};
  inst.w = 1.0;
  inst.eta = 0.0;
  const auto in = inst.input();
  REQUIRE(max_scaling(0, in) == 4.0);
  REQUIRE(max_scaling(1, in) == 0.5);

  SECTION("linear in gain, inverse in sample count") {
    Instance doubled = inst;
    doubled.gains = {4.0, 1.0};
    REQUIRE(max_scaling(0, doubled.input()) == 8.0);
    doubled = inst;
    doubled.counts = {2, 2};
    REQUIRE(max_scaling(0, doubled.input()) == 2.0);
  }

  SECTION("degenerate entry signals instead of dividing by zero") {
    Instance degen = inst;
    degen.w = 0.0;
    degen.eta = 0.0;
    REQUIRE_THROWS_AS(max_scaling(0, degen.input()), DegenerateEntryError);
  }
}

TEST_CASE("induced selection at the candidate extremes") {
  Instance inst;
  inst.gains = {1.0, 2.0, 0.5};
  inst.counts = {4, 4, 4};
  inst.powers = {1.0, 1.0, 1.0};
  const auto in = inst.input();
  std::vector<double> b_max(3);
  for (std::size_t k = 0; k < 3; ++k) b_max[k] = max_scaling(k, in);
  const double lo = *std::min_element(b_max.begin(), b_max.end());
  const double hi = *std::max_element(b_max.begin(), b_max.end());

  auto at_lo = induced_selection(lo, in);
  REQUIRE(at_lo == std::vector<std::uint8_t>{1, 1, 1});

  auto at_hi = induced_selection(hi, in);
  for (std::size_t k = 0; k < 3; ++k)
    REQUIRE(at_hi[k] == (b_max[k] == hi ? 1 : 0));

  auto above = induced_selection(hi * (1.0 + 1e-12), in);
  REQUIRE(above == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("zero noise makes full selection optimal") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_oracle_instance(6, rng);
    inst.noise_variance = 0.0;
    const auto in = inst.input();
    const auto fp = solve_p4(in);
    REQUIRE(std::count(fp.beta.begin(), fp.beta.end(), 1) == 6);
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 6; ++k) lo = std::min(lo, max_scaling(k, in));
    REQUIRE(fp.b == lo);
  }
}

TEST_CASE("zero exclusion penalty maximizes the selected mass times b") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_oracle_instance(7, rng);
    inst.rho1 = 0.0;
    const auto in = inst.input();
    const auto fp = solve_p4(in);
    // direct evaluation over the candidate points
    double best_mass = 0.0;
    for (std::size_t k = 0; k < 7; ++k) {
      const double b = max_scaling(k, in);
      const auto beta = induced_selection(b, in);
      double mass = 0.0;
      for (std::size_t i = 0; i < 7; ++i)
        if (beta[i]) mass += static_cast<double>(in.sample_counts[i]);
      best_mass = std::max(best_mass, mass * b);
    }
    double fp_mass = 0.0;
    for (std::size_t i = 0; i < 7; ++i)
      if (fp.beta[i]) fp_mass += static_cast<double>(in.sample_counts[i]);
    REQUIRE_THAT(fp_mass * fp.b, Catch::Matchers::WithinRel(best_mass, 1e-12));
  }
}

TEST_CASE("single worker oracle") {
  Instance inst;
  inst.gains = {1.5};
  inst.counts = {3};
  inst.powers = {2.0};
  const auto in = inst.input();
  const auto best = brute_force_oracle(in);
  REQUIRE(best.beta == std::vector<std::uint8_t>{1});
  REQUIRE(best.b == max_scaling(0, in));
}

TEST_CASE("two symmetric workers: noise selects both, exclusion-free picks one") {
  Instance inst;
  inst.gains = {1.0, 2.0};
  inst.counts = {5, 5};
  inst.powers = {1.0, 1.0};
  inst.w = 1.0;
  inst.eta = 0.0;

  SECTION("dominant noise keeps everyone in") {
    inst.sigma2 = 10.0;
    inst.rho1 = 1e-6;
    const auto best = brute_force_oracle(inst.input());
    // subsets: {0} at b0, {1} at b1, {0,1} at min = b0. Mass doubled at the
    // same b beats halving the denominator.
    REQUIRE(best.beta == std::vector<std::uint8_t>{1, 1});
  }
  SECTION("no noise keeps everyone in regardless") {
    inst.sigma2 = 0.0;
    const auto best = brute_force_oracle(inst.input());
    REQUIRE(best.beta == std::vector<std::uint8_t>{1, 1});
  }
  SECTION("oracle is no worse than every candidate point") {
    inst.sigma2 = 0.3;
    const auto in = inst.input();
    const auto best = brute_force_oracle(in);
    for (std::size_t k = 0; k < 2; ++k) {
      const double b = max_scaling(k, in);
      const auto beta = induced_selection(b, in);
      REQUIRE(best.objective <= objective_R(b, beta, in));
    }
  }
}

TEST_CASE("oracle refuses oversized instances") {
  Instance inst;
  inst.gains.assign(21, 1.0);
  inst.counts.assign(21, 1);
  inst.powers.assign(21, 1.0);
  REQUIRE_THROWS_AS(brute_force_oracle(inst.input()), ConfigError);
}

TEST_CASE("line search matches the exhaustive oracle on random instances") {
  const auto res = oracle_check(300, 2, 12, 2024);
  REQUIRE(res.total == 300);
  REQUIRE(res.mismatches == 0);
}

TEST_CASE("selections along the candidate list are nested") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int u = static_cast<int>(rng.uniform_int(2, 10));
    const auto inst = random_oracle_instance(u, rng);
    const auto in = inst.input();
    std::vector<double> b_max(static_cast<std::size_t>(u));
    for (std::size_t k = 0; k < b_max.size(); ++k)
      b_max[k] = max_scaling(k, in);
    std::vector<std::size_t> order(b_max.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return b_max[a] > b_max[b]; });
    std::vector<std::uint8_t> prev;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto beta = induced_selection(b_max[order[rank]], in);
      // exactly the workers whose own cap admits this candidate
      for (std::size_t i = 0; i < beta.size(); ++i)
        REQUIRE(beta[i] == (b_max[i] >= b_max[order[rank]] ? 1 : 0));
      if (!prev.empty())
        for (std::size_t i = 0; i < beta.size(); ++i)
          REQUIRE(prev[i] <= beta[i]);  // descending candidates only grow
      prev = beta;
    }
  }
}

TEST_CASE("conservative constraint keeps the chosen point feasible") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int u = static_cast<int>(rng.uniform_int(2, 8));
    const auto inst = random_oracle_instance(u, rng);
    const auto in = inst.input();
    const auto fp = solve_p4(in);
    const double margin = std::abs(in.prev_global_entry) + in.eta;
    for (std::size_t i = 0; i < fp.beta.size(); ++i) {
      if (!fp.beta[i]) continue;
      // any realized local entry within the margin obeys the power cap
      const double w_local = rng.uniform(-margin, margin);
      const double tx = static_cast<double>(in.sample_counts[i]) * fp.b *
                        w_local / in.gains[i];
      REQUIRE(tx * tx <= in.max_powers_mw[i] * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("degenerate entry selects everyone at the ceiling") {
  Instance inst;
  inst.gains = {1.0, 2.0};
  inst.counts = {1, 1};
  inst.powers = {1.0, 1.0};
  inst.w = 0.0;
  inst.eta = 0.0;
  auto in = inst.input();
  in.b_ceiling = 123.0;
  const auto fp = solve_p4(in);
  REQUIRE(fp.b == 123.0);
  REQUIRE(fp.beta == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("eta modes") {
  EtaConfig fixed{EtaMode::fixed, 0.1};
  REQUIRE(compute_eta(fixed, 0.8, 0.5, true) == 0.1);
  REQUIRE(compute_eta(fixed, 0.8, 0.5, false) == 0.1);

  EtaConfig adaptive{EtaMode::adaptive_diff, 0.2};
  REQUIRE_THAT(compute_eta(adaptive, 0.8, 0.5, true),
               Catch::Matchers::WithinAbs(0.3, 1e-15));
  REQUIRE(compute_eta(adaptive, 0.8, 0.5, false) == 0.2);
}
