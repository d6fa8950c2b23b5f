#include <cmath>
#include <memory>

#include "adathresh/estimators.hpp"
#include "adathresh/oracle.hpp"
#include "doctest.h"

using namespace adathresh;

namespace {

Graph two_node_graph() {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges{{0, 1}};
  return Graph(2, edges);
}

Assignment fixed_assignment(std::vector<std::uint8_t> z) {
  Assignment a;
  a.z = std::move(z);
  return a;
}

struct EnumeratedMoments {
  double mean = 0.0;
  double second = 0.0;
  double var() const { return second - mean * mean; }
};

// expectation of fn over the full assignment space
template <typename Fn>
EnumeratedMoments enumerate_moments(const Graph& g, const Design& d, Fn&& fn) {
  EnumeratedMoments m;
  enumerate_assignments(d, g, [&](const std::vector<std::uint8_t>& z, double pr) {
    Assignment a;
    a.z = z;
    const double value = fn(a);
    m.mean += pr * value;
    m.second += pr * value * value;
  });
  return m;
}

}  // namespace

TEST_CASE("inverse-propensity estimate on the two-node graph") {
  const Graph g = two_node_graph();
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(1);  // {0, 1}
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(2);
  const OutcomeModel model =
      OutcomeModel::make(1, 1, 0, ExposureEffect::linear, 2, 0, 0);

  // both treated: each arm indicator hits with probability 1/4
  CHECK(probs.m1(0, 1) == doctest::Approx(0.25));
  const Assignment a = fixed_assignment({1, 1});
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y = evaluate(model, a, e);
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(ht_estimate(y, a, e, probs, 1, set) == doctest::Approx(8.0));

  // averaged over the full space the fully-exposed contrast is unbiased
  const auto moments = enumerate_moments(g, d, [&](const Assignment& az) {
    const ExposureProfile ez = exposure_fractions(g, az);
    return ht_estimate(evaluate(model, az, ez), az, ez, probs, 1, set);
  });
  CHECK(moments.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero outcomes give a zero estimate") {
  const Graph g = kth_power_cycle(5, 1);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(2);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(5);
  const Assignment a = fixed_assignment({1, 0, 1, 0, 1});
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y(5, 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(ht_estimate(y, a, e, probs, k, set) == 0.0);
    CHECK(ht_variance_estimate(y, a, e, probs, k, set) == 0.0);
  }
}

TEST_CASE("direct-effect contrast at threshold zero is unbiased") {
  const Graph g = kth_power_cycle(8, 1);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(2);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(8);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 0, ExposureEffect::linear, 8, 0, 0);
  const auto moments = enumerate_moments(g, d, [&](const Assignment& az) {
    const ExposureProfile ez = exposure_fractions(g, az);
    return ht_estimate(evaluate(model, az, ez), az, ez, probs, 0, set);
  });
  CHECK(std::abs(moments.mean - 10.0) < 1e-10);
}

TEST_CASE("fully-exposed contrast is unbiased on the 12-node cycle") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(12);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 7, ExposureEffect::linear, 12, 0, 0);
  const double tau = true_ate(model);
  const auto moments = enumerate_moments(g, d, [&](const Assignment& az) {
    const ExposureProfile ez = exposure_fractions(g, az);
    return ht_estimate(evaluate(model, az, ez), az, ez, probs, 4, set);
  });
  CHECK(std::abs(moments.mean - tau) < 1e-10);
}

TEST_CASE("bandwidth form equals the threshold form") {
  const Design d = Design::unit_bernoulli(0.5);
  int instances = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // alternate between the 5-cycle and a 20-node blocked graph
    const Graph g = trial % 2 == 0
                        ? kth_power_cycle(5, 1)
                        : sbm(std::vector<std::int32_t>{10, 10}, 0.8, 0.3,
                              1000 + trial);
    const ThresholdGrid grid =
        g.regular() ? ThresholdGrid::uniform(g.degree(0))
                    : ThresholdGrid::uniform(10);
    const ExposureProbabilities probs = exact_unit_marginals(g, 0.5, grid);
    std::vector<std::int32_t> units;
    for (const std::int32_t i : non_isolated_subset(g)) units.push_back(i);
    if (units.empty()) continue;
    const EstimationSet set = EstimationSet::of(units, g.n());
    const OutcomeModel model = OutcomeModel::make(
        10, 10, 5, ExposureEffect::linear, g.n(), 1.0, 17 + trial);
    for (std::int64_t r = 0; r < 2; ++r) {
      const Assignment a = sample_assignment(d, g, 600 + trial, r);
      const ExposureProfile e =
          exposure_fractions(g, a, IsolatedPolicy::drop);
      const OutcomeVector y = evaluate(model, a, e);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double via_threshold = ht_estimate(y, a, e, probs, k, set);
        const double via_bandwidth =
            ht_bandwidth_form(y, a, e, probs, one_minus(grid[k]), set);
        CHECK(std::abs(via_threshold - via_bandwidth) < 1e-12);
        ++instances;
      }
    }
  }
  CHECK(instances >= 100);
}

TEST_CASE("difference in means") {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges{
      {0, 1}, {1, 2}, {2, 3}};
  const Graph g(4, edges);
  const EstimationSet set = EstimationSet::all(4);
  const Assignment a = fixed_assignment({1, 1, 0, 0});
  const ExposureProfile e = exposure_fractions(g, a);

  SUBCASE("plain arm means at threshold zero") {
    const OutcomeVector y{3, 5, 1, 1};
    CHECK(dim_estimate(y, a, e, Rational(0, 1), set) == doctest::Approx(3.0));
  }
  SUBCASE("identical outcomes cancel") {
    const OutcomeVector y(4, 2.5);
    CHECK(dim_estimate(y, a, e, Rational(0, 1), set) == doctest::Approx(0.0));
  }
  SUBCASE("empty arm is reported") {
    const Assignment all = fixed_assignment({1, 1, 1, 1});
    const ExposureProfile ee = exposure_fractions(g, all);
    const OutcomeVector y{1, 2, 3, 4};
    CHECK_THROWS_AS(dim_estimate(y, all, ee, Rational(0, 1), set),
                    empty_arm_error);
  }
}

TEST_CASE("difference in means matches brute-force arm means") {
  const Graph g = kth_power_cycle(5, 1);
  const Design d = Design::unit_bernoulli(0.5);
  const EstimationSet set = EstimationSet::all(5);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 5, 1.0, 5);
  const Rational h(1, 2);
  for (std::int64_t r = 0; r < 20; ++r) {
    const Assignment a = sample_assignment(d, g, 31, r);
    const ExposureProfile e = exposure_fractions(g, a);
    const OutcomeVector y = evaluate(model, a, e);
    double s1 = 0, s0 = 0;
    int n1 = 0, n0 = 0;
    for (std::int32_t i = 0; i < 5; ++i) {
      const double ei = e.fraction(i);
      if (a.z[i] && ei >= 0.5 - 1e-15) {
        s1 += y[i];
        ++n1;
      }
      if (!a.z[i] && ei <= 0.5 + 1e-15) {
        s0 += y[i];
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0) {
      CHECK_THROWS_AS(dim_estimate(y, a, e, h, set), empty_arm_error);
      continue;
    }
    CHECK(dim_estimate(y, a, e, h, set) ==
          doctest::Approx(s1 / n1 - s0 / n0).epsilon(1e-12));
  }
}

TEST_CASE("least squares recovers noise-free coefficients") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const EstimationSet set = EstimationSet::all(12);
  const Assignment a = sample_assignment(d, g, 8, 1);
  const ExposureProfile e = exposure_fractions(g, a);

  SUBCASE("global interpolation") {
    const OutcomeModel model =
        OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 0, 0);
    const OutcomeVector y = evaluate(model, a, e);
    const OlsFit fit =
        ols_fit(y, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
    REQUIRE_FALSE(fit.degenerate);
    CHECK(std::abs(fit.intercept - 10.0) < 1e-10);
    CHECK(std::abs(*fit.treatment - 10.0) < 1e-10);
    CHECK(std::abs(fit.exposure - 5.0) < 1e-10);
  }
  SUBCASE("no exposure effect estimates zero") {
    const OutcomeModel model =
        OutcomeModel::make(10, 10, 0, ExposureEffect::linear, 12, 0, 0);
    const OutcomeVector y = evaluate(model, a, e);
    const OlsFit fit =
        ols_fit(y, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
    REQUIRE_FALSE(fit.degenerate);
    CHECK(std::abs(fit.exposure) < 1e-10);
  }
  SUBCASE("local treated window reproduces the slope") {
    const OutcomeModel model =
        OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 0, 0);
    const OutcomeVector y = evaluate(model, a, e);
    const OlsFit fit =
        ols_fit(y, a, e, Rational(1, 2), Rational(1, 1), Arm::treated, set);
    if (!fit.degenerate) CHECK(std::abs(fit.exposure - 5.0) < 1e-10);
  }
  SUBCASE("constant exposure in the window is degenerate") {
    const Assignment all = fixed_assignment(std::vector<std::uint8_t>(12, 1));
    const ExposureProfile ee = exposure_fractions(g, all);
    const OutcomeVector y(12, 1.0);
    const OlsFit fit =
        ols_fit(y, all, ee, Rational(0, 1), Rational(1, 1), Arm::treated, set);
    CHECK(fit.degenerate);
  }
}

TEST_CASE("bias signal") {
  const Graph g = kth_power_cycle(5, 1);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(2);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(5);
  const Assignment a = fixed_assignment({1, 0, 0, 1, 0});
  const ExposureProfile e = exposure_fractions(g, a);

  SUBCASE("fully-exposed threshold carries no signal") {
    // counted treated units have e = 1, counted controls e = 0
    CHECK(ht_bias_signal(e, a, 3.0, 3.0, probs, 2, set) == 0.0);
  }
  SUBCASE("zero slope means zero signal") {
    CHECK(ht_bias_signal(e, a, 0.0, 0.0, probs, 1, set) == 0.0);
  }
  SUBCASE("matches an independent evaluation of the two sums") {
    const double gamma_hat = 1.0;
    double expected = 0.0;
    for (std::int32_t i = 0; i < 5; ++i) {
      const double ei = e.fraction(i);
      if (a.z[i] && ei >= 0.5)
        expected += (1.0 - ei) * gamma_hat / probs.m1(i, 1);
      if (!a.z[i] && ei <= 0.5) expected += ei * gamma_hat / probs.m0(i, 1);
    }
    expected /= 5.0;
    CHECK(ht_bias_signal(e, a, gamma_hat, gamma_hat, probs, 1, set) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("variance estimator expectation against enumerated truth") {
  const Graph g = kth_power_cycle(5, 1);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(2);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(5);

  const auto study = [&](const OutcomeModel& model, std::size_t k) {
    EnumeratedMoments tau_m;
    double vhat_mean = 0.0;
    enumerate_assignments(d, g, [&](const std::vector<std::uint8_t>& z, double pr) {
      Assignment a;
      a.z = z;
      const ExposureProfile e = exposure_fractions(g, a);
      const OutcomeVector y = evaluate(model, a, e);
      const double t = ht_estimate(y, a, e, probs, k, set);
      tau_m.mean += pr * t;
      tau_m.second += pr * t * t;
      vhat_mean += pr * ht_variance_estimate(y, a, e, probs, k, set);
    });
    return std::make_pair(tau_m.var(), vhat_mean);
  };

  SUBCASE("unbiased when the outcome is constant per unit and no joint "
          "support is missing") {
    // beta = gamma = 0: a unit's outcome does not depend on the assignment,
    // so the own-pair bound is tight
    const OutcomeModel model =
        OutcomeModel::make(10, 0, 0, ExposureEffect::linear, 5, 1.0, 3);
    for (const std::size_t k : {std::size_t{0}, std::size_t{1}}) {
      const auto [true_var, expected_vhat] = study(model, k);
      CHECK(std::abs(expected_vhat - true_var) < 1e-10);
    }
    // at the top threshold cross-arm support vanishes for every pair
    const auto [true_var_top, expected_vhat_top] = study(model, 2);
    CHECK(expected_vhat_top >= true_var_top - 1e-12);
    CHECK(expected_vhat_top > true_var_top + 1e-6);
  }
  SUBCASE("conservative for the general model") {
    const OutcomeModel model =
        OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 5, 1.0, 3);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto [true_var, expected_vhat] = study(model, k);
      CHECK(expected_vhat >= true_var - 1e-10);
    }
  }
}

TEST_CASE("two-node variance is conservative at the top threshold") {
  const Graph g = two_node_graph();
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(1);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(2);
  const OutcomeModel model =
      OutcomeModel::make(1, 1, 0, ExposureEffect::linear, 2, 0, 0);

  EnumeratedMoments tau_m;
  double vhat_mean = 0.0;
  enumerate_assignments(d, g, [&](const std::vector<std::uint8_t>& z, double pr) {
    Assignment a;
    a.z = z;
    const ExposureProfile e = exposure_fractions(g, a);
    const OutcomeVector y = evaluate(model, a, e);
    const double t = ht_estimate(y, a, e, probs, 1, set);
    tau_m.mean += pr * t;
    tau_m.second += pr * t * t;
    vhat_mean += pr * ht_variance_estimate(y, a, e, probs, 1, set);
  });
  CHECK(vhat_mean >= tau_m.var() - 1e-12);
}

TEST_CASE("difference-in-means variance follows the printed formula") {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges{{0, 1}};
  const Graph g(2, edges);
  const EstimationSet set = EstimationSet::all(2);
  const Assignment a = fixed_assignment({1, 0});
  const ExposureProfile e = exposure_fractions(g, a);

  SUBCASE("single unit per arm") {
    const OutcomeVector y{3, 1};
    // each arm mean equals its single member; the masked deviations reduce
    // to the squared outcomes
    CHECK(dim_variance_estimate(y, a, e, Rational(0, 1), set) ==
          doctest::Approx(2.0 * (9.0 + 1.0)));
  }
  SUBCASE("zero outcomes") {
    const OutcomeVector y{0, 0};
    CHECK(dim_variance_estimate(y, a, e, Rational(0, 1), set) == 0.0);
  }
  SUBCASE("independent recomputation on a larger sample") {
    const Graph cyc = kth_power_cycle(9, 2);
    const EstimationSet all9 = EstimationSet::all(9);
    const Assignment az = fixed_assignment({1, 0, 1, 1, 0, 0, 1, 0, 1});
    const ExposureProfile ez = exposure_fractions(cyc, az);
    const OutcomeVector y{5, 1, 4, 4, 2, 0, 6, 1, 5};
    const Rational h(1, 4);
    double s1 = 0, s0 = 0;
    int n1 = 0, n0 = 0;
    std::vector<double> m1(9, 0.0), m0(9, 0.0);
    for (std::int32_t i = 0; i < 9; ++i) {
      if (az.z[i] && ez.treated_exposed(i, h)) {
        m1[i] = y[i];
        s1 += y[i];
        ++n1;
      }
      if (!az.z[i] && ez.control_exposed(i, h)) {
        m0[i] = y[i];
        s0 += y[i];
        ++n0;
      }
    }
    REQUIRE(n1 > 0);
    REQUIRE(n0 > 0);
    double vt = 0, vc = 0;
    for (std::int32_t i = 0; i < 9; ++i) {
      vt += (m1[i] - s1 / n1) * (m1[i] - s1 / n1);
      vc += (m0[i] - s0 / n0) * (m0[i] - s0 / n0);
    }
    const double expected = 2.0 / (9 - 1) * (vt / n1 + vc / n0);
    CHECK(dim_variance_estimate(y, az, ez, h, all9) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("profile selection") {
  SUBCASE("argmin with tie toward smaller h") {
    std::vector<ThresholdStats> stats(3);
    stats[0] = {0, 0, 0, 1.0, true};
    stats[1] = {0, 0, 0, 0.2, true};
    stats[2] = {0, 0, 0, 0.4, true};
    CHECK(select_min_mse(stats) == 1);
    stats[0].mse_hat = 0.2;
    CHECK(select_min_mse(stats) == 0);
    stats[0].feasible = false;
    CHECK(select_min_mse(stats) == 1);
    stats[1].feasible = false;
    stats[2].feasible = false;
    CHECK_THROWS_AS(select_min_mse(stats), data_error);
  }
}

TEST_CASE("profile fields are consistent") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(12);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 1.0, 9);
  const Assignment a = sample_assignment(d, g, 77, 0);
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y = evaluate(model, a, e);
  const MseProfile profile = mse_profile(y, a, e, &probs, grid,
                                         Family::horvitz_thompson,
                                         BiasMode::global, set);
  for (const ThresholdStats& s : profile.at) {
    if (!s.feasible) continue;
    CHECK(s.mse_hat == s.bias_hat * s.bias_hat + s.var_hat);  // exact
  }
  CHECK(profile.at[profile.selected].feasible);
}

TEST_CASE("noise-free linear model gives an exact slope and a silent "
          "fully-exposed signal") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(12);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 0, 0);
  const Assignment a = sample_assignment(d, g, 123, 2);
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y = evaluate(model, a, e);
  const OlsFit fit =
      ols_fit(y, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
  REQUIRE_FALSE(fit.degenerate);
  CHECK(std::abs(fit.exposure - 5.0) < 1e-10);
  CHECK(ht_bias_signal(e, a, fit.exposure, fit.exposure, probs,
                       grid.size() - 1, set) == 0.0);
}

TEST_CASE("slope and bias signal are invariant to outcome shifts") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(12);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 0, 0);
  const Assignment a = sample_assignment(d, g, 55, 4);
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y = evaluate(model, a, e);
  OutcomeVector shifted = y;
  for (double& v : shifted) v += 100.0;

  const OlsFit f1 =
      ols_fit(y, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
  const OlsFit f2 =
      ols_fit(shifted, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
  REQUIRE_FALSE(f1.degenerate);
  REQUIRE_FALSE(f2.degenerate);
  CHECK(std::abs(f1.exposure - f2.exposure) < 1e-9);
  const double b1 =
      ht_bias_signal(e, a, f1.exposure, f1.exposure, probs, 2, set);
  const double b2 =
      ht_bias_signal(e, a, f2.exposure, f2.exposure, probs, 2, set);
  CHECK(std::abs(b1 - b2) < 1e-9);
}

TEST_CASE("interval scan") {
  const auto run = [](std::vector<double> taus, std::vector<double> sdevs) {
    std::vector<std::uint8_t> feasible(taus.size(), 1);
    return lepski_select(taus, sdevs, feasible);
  };
  SUBCASE("identical intervals reach the bottom of the grid") {
    CHECK(run({1, 1, 1}, {0.5, 0.5, 0.5}) == 0);
  }
  SUBCASE("immediate failure stays at the top") {
    // intervals [2,3] and [0,1]
    CHECK(run({9, 2.5, 0.5}, {9, 0.25, 0.25}) == 2);
  }
  SUBCASE("scan stops when the running intersection empties") {
    // [5,9], [3,6], [0,4] from the bottom up
    CHECK(run({7, 4.5, 2}, {1, 0.75, 1}) == 1);
  }
}

TEST_CASE("adaptive selection without an exposure effect stays low") {
  const Graph g = kth_power_cycle(1000, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = with_exact_marginals(
      mc_probabilities(g, d, grid, 4000, 2024), g, 0.5);
  const EstimationSet set = EstimationSet::all(1000);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 0, ExposureEffect::linear, 1000, 0, 0);
  int low = 0;
  const int replicates = 200;
  for (int r = 0; r < replicates; ++r) {
    const Assignment a = sample_assignment(d, g, 91, r);
    const ExposureProfile e = exposure_fractions(g, a);
    const OutcomeVector y = evaluate(model, a, e);
    const MseProfile profile = mse_profile(y, a, e, &probs, grid,
                                           Family::horvitz_thompson,
                                           BiasMode::global, set);
    if (profile.selected == 0) ++low;
  }
  CHECK(low > replicates / 2);
}

TEST_CASE("adaptive selection under strong interference moves up") {
  const Graph g = kth_power_cycle(1000, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = with_exact_marginals(
      mc_probabilities(g, d, grid, 4000, 2024), g, 0.5);
  const EstimationSet set = EstimationSet::all(1000);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 30, ExposureEffect::linear, 1000, 1.0, 6);
  int above_zero = 0;
  const int replicates = 200;
  for (int r = 0; r < replicates; ++r) {
    const Assignment a = sample_assignment(d, g, 92, r);
    const ExposureProfile e = exposure_fractions(g, a);
    const OutcomeVector y = evaluate(model, a, e);
    const EstimatorReport report = estimate_with_rule(
        ThresholdRule::adaptive, Family::horvitz_thompson, BiasMode::global, y,
        a, e, &probs, grid, set);
    if (report.chosen_index > 0) ++above_zero;
  }
  CHECK(above_zero > replicates / 2);
}

TEST_CASE("fixed rules pin their thresholds") {
  const Graph g = kth_power_cycle(12, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = enumeration_probabilities(g, d, grid);
  const EstimationSet set = EstimationSet::all(12);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 12, 1.0, 4);
  const Assignment a = sample_assignment(d, g, 17, 0);
  const ExposureProfile e = exposure_fractions(g, a);
  const OutcomeVector y = evaluate(model, a, e);

  const EstimatorReport zero = estimate_with_rule(
      ThresholdRule::fixed_zero, Family::horvitz_thompson, BiasMode::global, y,
      a, e, &probs, grid, set);
  CHECK(zero.chosen_h == Rational(0, 1));
  const EstimatorReport one = estimate_with_rule(
      ThresholdRule::fixed_one, Family::horvitz_thompson, BiasMode::global, y,
      a, e, &probs, grid, set);
  CHECK(one.chosen_h == Rational(1, 1));
  CHECK(zero.estimate != one.estimate);

  const EstimatorReport lep = estimate_with_rule(
      ThresholdRule::lepski, Family::horvitz_thompson, BiasMode::global, y, a,
      e, &probs, grid, set);
  const MseProfile profile = mse_profile(y, a, e, &probs, grid,
                                         Family::horvitz_thompson,
                                         BiasMode::global, set);
  CHECK(lep.chosen_index == lepski_select(profile));
}

TEST_CASE("local bias mode falls back on degenerate windows") {
  const Graph g = kth_power_cycle(20, 2);
  const Design d = Design::unit_bernoulli(0.5);
  const ThresholdGrid grid = ThresholdGrid::uniform(4);
  const ExposureProbabilities probs = with_exact_marginals(
      mc_probabilities(g, d, grid, 3000, 12), g, 0.5);
  const EstimationSet set = EstimationSet::all(20);
  const OutcomeModel model =
      OutcomeModel::make(10, 10, 5, ExposureEffect::linear, 20, 0, 0);
  for (std::int64_t r = 0; r < 10; ++r) {
    const Assignment a = sample_assignment(d, g, 3, r);
    const ExposureProfile e = exposure_fractions(g, a);
    const OutcomeVector y = evaluate(model, a, e);
    const MseProfile profile = mse_profile(y, a, e, &probs, grid,
                                           Family::horvitz_thompson,
                                           BiasMode::local, set);
    // on noise-free linear data every non-degenerate window reproduces the
    // slope, so the local signal agrees with the global one
    const MseProfile global = mse_profile(y, a, e, &probs, grid,
                                          Family::horvitz_thompson,
                                          BiasMode::global, set);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (!profile.at[k].feasible) continue;
      CHECK(profile.at[k].bias_hat ==
            doctest::Approx(global.at[k].bias_hat).epsilon(1e-8));
    }
  }
}
