#pragma once

#include <cstdint>
#include <vector>

#include "adathresh/estimators.hpp"

namespace adathresh {

// Closed-form bias of the inverse-propensity contrast on the k-th power
// cycle under unit Bernoulli(1/2) randomization at threshold h = l/2k,
// evaluated in exact integer arithmetic and scaled by gamma. Defined for
// even l only; odd l is rejected rather than interpolated.
double prop1_bias(int k, int l, double gamma);

// Order-of-magnitude references for the variance; proportional expressions
// with dominating terms only, never equal to the enumerated variance.
struct ScaleRef {
  double value = 0.0;
  bool approximate = true;
};

// Unit randomization on the k-th power cycle (degree d = 2k).
ScaleRef prop2_var_scale(int k, double h, double alpha, double beta,
                         double gamma, double n, double p);

// Cluster randomization with clusters of size 2k+1: bias approximately
// 2 gamma (h - 1) for h >= 1/2 (statement form); the derivation's variant
// 2 gamma (h - 2) is available behind the flag.
ScaleRef prop3_bias(double h, double gamma, bool derivation_variant = false);

ScaleRef prop4_var_scale(int d, double h, double beta, double gamma, double n,
                         double p);

enum class OracleMethod { enumeration, monte_carlo, closed_form };

std::string to_string(OracleMethod m);

struct OracleStats {
  double bias = 0.0;
  double var = 0.0;
  double mse = 0.0;
  double rmse_over_ate = 0.0;
  bool feasible = false;
  std::int64_t excluded = 0;  // replicates excluded at this threshold
};

struct OracleProfile {
  ThresholdGrid grid;
  std::vector<OracleStats> at;
  std::size_t h_star = 0;  // argmin of mse over feasible thresholds
  OracleMethod method = OracleMethod::enumeration;
  double tau = 0.0;  // the true ATE the profile is measured against
  std::int64_t draws = 0;
  std::uint64_t seed = 0;

  const Rational& h_star_threshold() const { return grid[h_star]; }
};

// Ground-truth bias/variance/MSE of the per-threshold estimator by weighted
// enumeration of the full assignment space. The probabilities inside the
// estimator must themselves be enumeration-exact.
OracleProfile exact_mse(const Graph& g, const Design& design,
                        const OutcomeModel& model,
                        const ExposureProbabilities& probs,
                        const ThresholdGrid& grid, Family family,
                        const EstimationSet& set,
                        std::uint64_t cap = kDefaultEnumerationCap);

// Empirical bias/variance/MSE against the true ATE over `replicates` fresh
// assignments; deterministic in seed. A replicate where the estimator is
// infeasible at some threshold is excluded at that threshold and counted.
OracleProfile mc_mse(const Graph& g, const Design& design,
                     const OutcomeModel& model,
                     const ExposureProbabilities& probs,
                     const ThresholdGrid& grid, std::int64_t replicates,
                     std::uint64_t seed, Family family,
                     const EstimationSet& set, int threads = 0);

}  // namespace adathresh
