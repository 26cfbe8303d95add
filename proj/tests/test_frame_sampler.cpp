#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "gazemark/frame_sampler.hpp"
#include "gazemark/rng.hpp"
#include "support/oracle_sampler.hpp"
#include "support/stats.hpp"

using namespace gazemark;

TEST_CASE("compute_weights collapses to exact uniform at lambda zero") {
  const auto w = compute_weights(5, 0.0);
  REQUIRE(w.size() == 4);
  for (double v : w) {
    CHECK(v == 0.25);
  }
  for (int n : {2, 3, 10, 250}) {
    const auto u = compute_weights(n, 0.0);
    REQUIRE(static_cast<int>(u.size()) == n - 1);
    for (double v : u) {
      CHECK(v == 1.0 / (n - 1));
    }
  }
}

TEST_CASE("compute_weights matches hand-evaluated values at lambda one") {
  const auto w = compute_weights(4, 1.0);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));
}

TEST_CASE("compute_weights degenerates to a single certain index") {
  const auto w = compute_weights(2, 0.5);
  REQUIRE(w.size() == 1);
  CHECK(w[0] == 1.0);
}

TEST_CASE("compute_weights normalizes for a spread of inputs") {
  for (int n : {2, 3, 7, 50, 300, 5000}) {
    for (double lambda : {0.0, 0.01, 0.1, 0.5, 1.0}) {
      const auto w = compute_weights(n, lambda);
      double sum = 0.0;
      for (double v : w) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("compute_weights adjacent ratio equals exp(lambda)") {
  for (double lambda : {0.01, 0.02, 0.04, 0.1, 1.0}) {
    for (int n : {10, 250}) {
      const auto w = compute_weights(n, lambda);
      const double expected = std::exp(lambda);
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        CHECK(w[i + 1] / w[i] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("compute_weights rejects bad inputs") {
  CHECK_THROWS_AS(compute_weights(5, -0.1), std::domain_error);
  CHECK_THROWS_AS(compute_weights(5, 1.5), std::domain_error);
  CHECK_THROWS_AS(compute_weights(5, std::nan("")), std::domain_error);
  CHECK_THROWS_AS(compute_weights(1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compute_weights(0, 0.5), std::invalid_argument);
}

TEST_CASE("draw_plan returns every frame when the budget covers them") {
  SamplingConfig cfg;
  cfg.sample_size = 5;
  cfg.lambda = 0.1;
  cfg.seed = 11;
  const auto plan = draw_plan(3, cfg);
  CHECK(plan.frame_indices == std::vector<int>{0, 1, 2});
  CHECK(plan.sequence_length == 3);
}

TEST_CASE("draw_plan handles a single-frame clip") {
  SamplingConfig cfg;
  cfg.sample_size = 1;
  const auto plan = draw_plan(1, cfg);
  CHECK(plan.frame_indices == std::vector<int>{0});
  CHECK(plan.probabilities.empty());
}

TEST_CASE("draw_plan is deterministic and well-formed") {
  SamplingConfig cfg;
  cfg.sample_size = 10;
  cfg.lambda = 0.1;
  cfg.seed = 7;
  const auto a = draw_plan(50, cfg);
  const auto b = draw_plan(50, cfg);
  CHECK(a.frame_indices == b.frame_indices);
  REQUIRE(a.frame_indices.size() == 10);
  CHECK(std::is_sorted(a.frame_indices.begin(), a.frame_indices.end()));
  CHECK(std::adjacent_find(a.frame_indices.begin(), a.frame_indices.end()) ==
        a.frame_indices.end());
  CHECK(a.frame_indices.back() == 49);
  CHECK(a.config_used == cfg);
}

TEST_CASE("draw_plan always keeps the final frame") {
  std::mt19937_64 meta(314159);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n_v = 1 + static_cast<int>(pick_index(meta, 300));
    SamplingConfig cfg;
    cfg.sample_size = 1 + static_cast<int>(pick_index(meta, 40));
    cfg.lambda = uniform01(meta);
    cfg.seed = meta();
    const auto plan = draw_plan(n_v, cfg);
    REQUIRE(!plan.frame_indices.empty());
    CHECK(plan.frame_indices.back() == n_v - 1);
    CHECK(static_cast<int>(plan.frame_indices.size()) ==
          std::min(cfg.sample_size, n_v));
    CHECK(std::is_sorted(plan.frame_indices.begin(), plan.frame_indices.end()));
    CHECK(std::adjacent_find(plan.frame_indices.begin(),
                             plan.frame_indices.end()) ==
          plan.frame_indices.end());
  }
}

TEST_CASE("draw_plan rejects bad inputs") {
  SamplingConfig cfg;
  cfg.sample_size = 0;
  CHECK_THROWS_AS(draw_plan(5, cfg), std::domain_error);
  cfg.sample_size = 3;
  CHECK_THROWS_AS(draw_plan(0, cfg), std::invalid_argument);
  cfg.lambda = 2.0;
  CHECK_THROWS_AS(draw_plan(5, cfg), std::domain_error);
}

TEST_CASE("plan_to_timestamps divides indices by fps") {
  SamplingPlan plan;
  plan.frame_indices = {0, 10};
  const auto ts = plan_to_timestamps(plan, 10.0);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0] == 0.0);
  CHECK(ts[1] == 1.0);

  plan.frame_indices = {249};
  const auto ts2 = plan_to_timestamps(plan, 25.0);
  REQUIRE(ts2.size() == 1);
  CHECK(ts2[0] == doctest::Approx(9.96).epsilon(1e-12));

  CHECK_THROWS_AS(plan_to_timestamps(plan, 0.0), std::domain_error);
  CHECK_THROWS_AS(plan_to_timestamps(plan, -1.0), std::domain_error);
}

TEST_CASE("sampler agrees with the renormalizing oracle") {
  // Compare per-index inclusion frequencies of the exponential-keys sampler
  // against the naive sequential oracle, and the first draw alone against
  // its exact categorical distribution.
  const int n_v = 50;
  const std::size_t draw_count = 9;  // n=10 with the final frame mandatory
  const int reps = 30000;
  const auto weights = compute_weights(n_v, 0.1);

  std::vector<std::uint64_t> incl_impl(weights.size(), 0);
  std::vector<std::uint64_t> incl_oracle(weights.size(), 0);
  std::vector<std::uint64_t> first_impl(weights.size(), 0);

  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng_impl(derive_seed(1001, "impl/" + std::to_string(rep)));
    std::mt19937_64 rng_oracle(derive_seed(1001, "oracle/" + std::to_string(rep)));
    const auto got =
        weighted_sample_without_replacement(weights, draw_count, rng_impl);
    const auto want =
        gazemark::testing::oracle_weighted_sample(weights, draw_count, rng_oracle);
    REQUIRE(got.size() == draw_count);
    REQUIRE(want.size() == draw_count);
    first_impl[got[0]]++;
    for (std::size_t idx : got) incl_impl[idx]++;
    for (std::size_t idx : want) incl_oracle[idx]++;
  }

  const double homog =
      gazemark::testing::chi_square_homogeneity(incl_impl, incl_oracle);
  CHECK(homog < gazemark::testing::kChi2Crit001Df48);

  std::vector<double> expected_first(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    expected_first[i] = weights[i] * reps;
  }
  const double gof = gazemark::testing::chi_square_gof(first_impl, expected_first);
  CHECK(gof < gazemark::testing::kChi2Crit001Df48);
}

TEST_CASE("weighted sampling rejects malformed weights") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(
      weighted_sample_without_replacement({0.5, 0.5}, 3, rng),
      std::invalid_argument);
  CHECK_THROWS_AS(
      weighted_sample_without_replacement({0.5, -0.5}, 1, rng),
      std::invalid_argument);
  CHECK_THROWS_AS(
      weighted_sample_without_replacement({0.5, std::nan("")}, 1, rng),
      std::invalid_argument);
}

TEST_CASE("weighted sampling defers zero-weight indices") {
  std::mt19937_64 rng(99);
  const auto got = weighted_sample_without_replacement({0.0, 1.0, 0.0}, 3, rng);
  REQUIRE(got.size() == 3);
  CHECK(got[0] == 1);
  std::set<std::size_t> rest(got.begin() + 1, got.end());
  CHECK(rest == std::set<std::size_t>{0, 2});
}
