#include <benchmark/benchmark.h>

#include "adathresh/estimators.hpp"
#include "adathresh/exposure.hpp"

namespace {

using namespace adathresh;

struct Fixture {
  Graph g = kth_power_cycle(1000, 2);
  Design design = Design::unit_bernoulli(0.5);
  ThresholdGrid grid = ThresholdGrid::uniform(4);
  ExposureProbabilities probs =
      with_exact_marginals(mc_probabilities(g, design, grid, 2000, 7, 1), g, 0.5);
  EstimationSet set = EstimationSet::all(g.n());
  Assignment a = sample_assignment(design, g, 11, 0);
  ExposureProfile e = exposure_fractions(g, a);
  OutcomeModel model = OutcomeModel::make(10, 10, 10, ExposureEffect::linear,
                                          g.n(), 1.0, 3);
  OutcomeVector y = evaluate(model, a, e);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_sample_assignment(benchmark::State& state) {
  auto& f = fixture();
  std::int64_t r = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_assignment(f.design, f.g, 1, r++));
}
BENCHMARK(BM_sample_assignment);

void BM_exposure_fractions(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(exposure_fractions(f.g, f.a));
}
BENCHMARK(BM_exposure_fractions);

void BM_mc_probabilities_1k_draws(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mc_probabilities(f.g, f.design, f.grid, 1000, 7, 1));
}
BENCHMARK(BM_mc_probabilities_1k_draws)->Unit(benchmark::kMillisecond);

void BM_ht_estimate(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(ht_estimate(f.y, f.a, f.e, f.probs, 2, f.set));
}
BENCHMARK(BM_ht_estimate);

void BM_ht_variance_estimate(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        ht_variance_estimate(f.y, f.a, f.e, f.probs, 2, f.set));
}
BENCHMARK(BM_ht_variance_estimate)->Unit(benchmark::kMicrosecond);

void BM_mse_profile(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(mse_profile(f.y, f.a, f.e, &f.probs, f.grid,
                                         Family::horvitz_thompson,
                                         BiasMode::global, f.set));
}
BENCHMARK(BM_mse_profile)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
