#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>

#include "adathresh/exposure.hpp"
#include "doctest.h"

using namespace adathresh;

namespace {

Assignment fixed_assignment(std::vector<std::uint8_t> z) {
  Assignment a;
  a.z = std::move(z);
  return a;
}

}  // namespace

TEST_CASE("exposure fractions on the 5-cycle") {
  const Graph g = kth_power_cycle(5, 1);
  const Assignment a = fixed_assignment({1, 0, 0, 1, 0});
  const ExposureProfile e = exposure_fractions(g, a);
  CHECK(e.treated == std::vector<std::int32_t>{0, 1, 1, 0, 2});
  CHECK(e.fraction(0) == 0.0);
  CHECK(e.fraction(1) == 0.5);
  CHECK(e.fraction(4) == 1.0);
}

TEST_CASE("all treated means full exposure everywhere") {
  const Graph g = kth_power_cycle(9, 2);
  const Assignment a = fixed_assignment(std::vector<std::uint8_t>(9, 1));
  const ExposureProfile e = exposure_fractions(g, a);
  for (std::int32_t i = 0; i < g.n(); ++i) CHECK(e.fraction(i) == 1.0);
}

TEST_CASE("isolated nodes rejected by default") {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges{{0, 1}};
  const Graph g(3, edges);
  const Assignment a = fixed_assignment({1, 0, 1});
  try {
    exposure_fractions(g, a);
    FAIL("expected rejection");
  } catch (const data_error& err) {
    CHECK(std::string(err.what()).find("2") != std::string::npos);
  }
  const ExposureProfile e = exposure_fractions(g, a, IsolatedPolicy::drop);
  CHECK(e.degree[2] == 0);
  CHECK_THROWS_AS(e.fraction(2), data_error);
}

TEST_CASE("threshold comparisons are exact integer arithmetic") {
  // agreement with an independent integer-product evaluation
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> dist(1, 1000000);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::int64_t d = dist(rng);
    const std::int64_t t = dist(rng) % (d + 1);
    const std::int64_t den = dist(rng);
    const std::int64_t num = dist(rng) % (den + 1);
    const Rational h(num, den);
    // products stay below 2^53, so the long double route is exact
    const bool expect_ge = static_cast<long double>(t) * h.den >=
                           static_cast<long double>(h.num) * d;
    const bool expect_le = static_cast<long double>(t) * h.den <=
                           static_cast<long double>(h.den - h.num) * d;
    CHECK(exposure_at_least(t, d, h) == expect_ge);
    CHECK(exposure_at_most_complement(t, d, h) == expect_le);
  }
  // boundary: e equal to h by construction counts as exposed
  for (int c = 1; c < 20; ++c) {
    const Rational h(1, 3);
    CHECK(exposure_at_least(c, 3 * c, h));
    CHECK(exposure_at_most_complement(2 * c, 3 * c, h));
    CHECK_FALSE(exposure_at_least(c - 1, 3 * c, h));
  }
}

TEST_CASE("exact unit marginals reproduce binomial tails") {
  const Graph g = kth_power_cycle(9, 2);  // degree 4 everywhere
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = exact_unit_marginals(g, 0.5, grid);
  CHECK(probs.m1(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(probs.m1(0, 4) == doctest::Approx(1.0 / 32).epsilon(1e-12));
  CHECK(probs.m1(0, 2) == doctest::Approx(11.0 / 32).epsilon(1e-12));
  // control side mirrors at p = 1/2
  CHECK(probs.m0(0, 2) == doctest::Approx(11.0 / 32).epsilon(1e-12));
  CHECK(probs.m0(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(probs.joints_computed);
}

TEST_CASE("dependent pairs under the unit design") {
  const Design unit = Design::unit_bernoulli(0.5);
  SUBCASE("5-cycle has all pairs dependent") {
    const Graph g = kth_power_cycle(5, 1);
    CHECK(dependent_pairs(g, unit).size() == 10);
  }
  SUBCASE("distant nodes on the big cycle are independent") {
    const Graph g = kth_power_cycle(1000, 2);
    const auto pairs = dependent_pairs(g, unit);
    const ExposureProbabilities probe = [&] {
      ExposureProbabilities p;
      p.pairs = pairs;
      return p;
    }();
    CHECK_FALSE(probe.pair_index(0, 500).has_value());
    CHECK(probe.pair_index(0, 4).has_value());   // distance 2
    CHECK_FALSE(probe.pair_index(0, 5).has_value());  // distance 3
  }
  SUBCASE("path endpoints") {
    std::vector<std::pair<std::int32_t, std::int32_t>> edges{
        {0, 1}, {1, 2}, {2, 3}, {3, 4}};
    const Graph g(5, edges);
    ExposureProbabilities probe;
    probe.pairs = dependent_pairs(g, unit);
    CHECK_FALSE(probe.pair_index(0, 4).has_value());
    CHECK(probe.pair_index(0, 2).has_value());
  }
}

TEST_CASE("cluster designs add shared-coin pairs") {
  // two 2-node clusters bridged through a third cluster with no internal
  // edges: listeners of the middle cluster become dependent
  std::vector<std::pair<std::int32_t, std::int32_t>> edges{{0, 2}, {3, 1}};
  const Graph g(4, edges);
  std::vector<std::int32_t> cluster_of{0, 1, 2, 2};
  auto clustering =
      std::make_shared<Clustering>(Clustering::from_assignments(cluster_of, g));
  const Design d = Design::cluster_bernoulli(0.5, clustering);
  ExposureProbabilities probe;
  probe.pairs = dependent_pairs(g, d);
  // nodes 0 and 1 listen to cluster 2's coin although they sit 4 hops apart
  CHECK(probe.pair_index(0, 1).has_value());
}

TEST_CASE("monte carlo marginals agree with binomial tails") {
  const Graph g = kth_power_cycle(50, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const std::int64_t R = 20000;
  const ExposureProbabilities mc = mc_probabilities(g, d, grid, R, 77);
  const ExposureProbabilities exact = exact_unit_marginals(g, 0.5, grid);
  for (std::int32_t i = 0; i < g.n(); i += 7) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double p1 = exact.m1(i, k);
      const double se1 = std::sqrt(p1 * (1 - p1) / R);
      CHECK(std::abs(mc.m1(i, k) - p1) < 4.0 * se1 + 1e-12);
      const double p0 = exact.m0(i, k);
      const double se0 = std::sqrt(p0 * (1 - p0) / R);
      CHECK(std::abs(mc.m0(i, k) - p0) < 4.0 * se0 + 1e-12);
    }
  }
}

TEST_CASE("monte carlo tables are deterministic for any worker count") {
  const Graph g = kth_power_cycle(60, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities one = mc_probabilities(g, d, grid, 5000, 3, 1);
  const ExposureProbabilities eight = mc_probabilities(g, d, grid, 5000, 3, 8);
  CHECK(one.marginal1 == eight.marginal1);
  CHECK(one.marginal0 == eight.marginal0);
  CHECK(one.joint11 == eight.joint11);
  CHECK(one.joint00 == eight.joint00);
  CHECK(one.joint10 == eight.joint10);
  CHECK(one.joint01 == eight.joint01);
}

TEST_CASE("marginal monotonicity and joint consistency") {
  const Graph g = kth_power_cycle(40, 2);
  const Design d = Design::unit_bernoulli(0.4);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = mc_probabilities(g, d, grid, 5000, 11);
  for (std::int32_t i = 0; i < g.n(); ++i) {
    CHECK(probs.m1(i, 0) == doctest::Approx(0.4).epsilon(0.1));
    for (std::size_t k = 1; k < grid.size(); ++k) {
      CHECK(probs.m1(i, k) <= probs.m1(i, k - 1) + 1e-15);
      CHECK(probs.m0(i, k) <= probs.m0(i, k - 1) + 1e-15);
    }
  }
  for (std::size_t pidx = 0; pidx < probs.pairs.size(); ++pidx) {
    const auto [i, j] = probs.pairs[pidx];
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double sum = probs.j11(pidx, k) + probs.j00(pidx, k) +
                         probs.j10(pidx, k) + probs.j01(pidx, k);
      CHECK(sum <= 1.0 + 1e-12);
      CHECK(probs.j11(pidx, k) <=
            std::min(probs.m1(i, k), probs.m1(j, k)) + 1e-12);
      CHECK(probs.j00(pidx, k) <=
            std::min(probs.m0(i, k), probs.m0(j, k)) + 1e-12);
      CHECK(probs.j10(pidx, k) <=
            std::min(probs.m1(i, k), probs.m0(j, k)) + 1e-12);
    }
  }
}

TEST_CASE("same-cluster pairs never split arms") {
  const Graph g = kth_power_cycle(20, 2);
  auto clustering = std::make_shared<Clustering>(contiguous_clusters(g, 5));
  const Design d = Design::cluster_bernoulli(0.5, clustering);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = mc_probabilities(g, d, grid, 3000, 5);
  for (std::size_t pidx = 0; pidx < probs.pairs.size(); ++pidx) {
    const auto [i, j] = probs.pairs[pidx];
    if (clustering->cluster_of[i] != clustering->cluster_of[j]) continue;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(probs.j10(pidx, k) == 0.0);
      CHECK(probs.j01(pidx, k) == 0.0);
    }
  }
}

TEST_CASE("enumeration probabilities match exact marginals") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities enumerated = enumeration_probabilities(g, d, grid);
  const ExposureProbabilities exact = exact_unit_marginals(g, 0.5, grid);
  for (std::int32_t i = 0; i < g.n(); ++i)
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(enumerated.m1(i, k) ==
            doctest::Approx(exact.m1(i, k)).epsilon(1e-10));
      CHECK(enumerated.m0(i, k) ==
            doctest::Approx(exact.m0(i, k)).epsilon(1e-10));
    }
  CHECK(enumerated.joints_computed);
}

TEST_CASE("probability cache round trip") {
  const Graph g = kth_power_cycle(15, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = mc_probabilities(g, d, grid, 500, 9);
  const ProbCacheKey key{g.hash(), d.describe(), grid, 500, 9};
  const std::string path =
      (std::filesystem::temp_directory_path() / "adathresh_probs_test.bin")
          .string();
  save_probabilities(probs, key, path);
  const auto loaded = load_probabilities(key, path);
  REQUIRE(loaded.has_value());
  CHECK(loaded->marginal1 == probs.marginal1);
  CHECK(loaded->marginal0 == probs.marginal0);
  CHECK(loaded->pairs == probs.pairs);
  CHECK(loaded->joint10 == probs.joint10);
  CHECK(loaded->joints_computed == probs.joints_computed);

  ProbCacheKey other = key;
  other.draws = 501;
  CHECK_FALSE(load_probabilities(other, path).has_value());
  std::remove(path.c_str());
}
