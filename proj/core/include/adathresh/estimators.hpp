#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adathresh/exposure.hpp"
#include "adathresh/outcomes.hpp"

namespace adathresh {

// The units an estimator averages over (n = units.size()). Pair sums in the
// variance estimator are restricted to pairs with both endpoints in the set.
struct EstimationSet {
  std::vector<std::int32_t> units;   // ascending
  std::vector<std::uint8_t> member;  // indexed by graph node id

  static EstimationSet all(std::int32_t n);
  static EstimationSet of(std::vector<std::int32_t> units, std::int32_t n_graph);
  std::int32_t size() const { return static_cast<std::int32_t>(units.size()); }
};

enum class Family { horvitz_thompson, difference_in_means };
enum class BiasMode { global, local };
enum class ThresholdRule { fixed_zero, fixed_one, adaptive, lepski };

std::string to_string(Family f);
std::string to_string(BiasMode m);
std::string to_string(ThresholdRule r);

// Inverse-propensity contrast of exposure-qualified arms at grid threshold k.
// Requires m1(i,k) > 0 and m0(i,k) > 0 for every unit in the set.
double ht_estimate(const OutcomeVector& y, const Assignment& a,
                   const ExposureProfile& e, const ExposureProbabilities& probs,
                   std::size_t k, const EstimationSet& set);

// Same estimand through the bandwidth parameterization: unit i contributes
// sign(2 z_i - 1) when |z_i - e_i| <= bandwidth, weighted by the probability
// of its realized arm qualifying. Equals ht_estimate at h = 1 - bandwidth.
double ht_bandwidth_form(const OutcomeVector& y, const Assignment& a,
                         const ExposureProfile& e,
                         const ExposureProbabilities& probs,
                         const Rational& bandwidth, const EstimationSet& set);

// Difference of within-window arm means; throws empty_arm_error.
double dim_estimate(const OutcomeVector& y, const Assignment& a,
                    const ExposureProfile& e, const Rational& h,
                    const EstimationSet& set);

enum class Arm { both, treated, control };

// Least squares on (1, z, e) for Arm::both, or (1, e) within a single arm,
// over units whose exposure lies in [window_lo, window_hi]. A rank-deficient
// or under-sized window returns degenerate = true.
struct OlsFit {
  double intercept = 0.0;
  std::optional<double> treatment;
  double exposure = 0.0;
  std::int32_t n_used = 0;
  bool degenerate = false;
};

OlsFit ols_fit(const OutcomeVector& y, const Assignment& a,
               const ExposureProfile& e, const Rational& window_lo,
               const Rational& window_hi, Arm arm, const EstimationSet& set);

// Regression-derived estimate of the bias at threshold k. gamma_treated
// multiplies the treated sum and gamma_control the control sum (they differ
// in local mode).
double ht_bias_signal(const ExposureProfile& e, const Assignment& a,
                      double gamma_treated, double gamma_control,
                      const ExposureProbabilities& probs, std::size_t k,
                      const EstimationSet& set);

double dim_bias_signal(const ExposureProfile& e, const Assignment& a,
                       double gamma_treated, double gamma_control,
                       const Rational& h, const EstimationSet& set);

struct VarianceDiagnostics {
  std::int64_t zero_joint_cells = 0;  // pair terms routed to the correction
};

// Design-based variance estimator for the Horvitz-Thompson contrast, with
// pair sums over the dependent-pair table (independent pairs contribute
// exactly zero) and pairs lacking joint support routed to the conservative
// correction term.
double ht_variance_estimate(const OutcomeVector& y, const Assignment& a,
                            const ExposureProfile& e,
                            const ExposureProbabilities& probs, std::size_t k,
                            const EstimationSet& set,
                            VarianceDiagnostics* diag = nullptr);

// 2/(n-1) (v_T + v_C) with indicator-masked arm means.
double dim_variance_estimate(const OutcomeVector& y, const Assignment& a,
                             const ExposureProfile& e, const Rational& h,
                             const EstimationSet& set);

struct ThresholdStats {
  double tau = 0.0;
  double bias_hat = 0.0;
  double var_hat = 0.0;
  double mse_hat = 0.0;  // bias_hat^2 + var_hat, exactly
  bool feasible = false;
};

struct MseProfile {
  ThresholdGrid grid;
  std::vector<ThresholdStats> at;
  std::size_t selected = 0;
  Family family = Family::horvitz_thompson;
  BiasMode bias_mode = BiasMode::global;
  double gamma_hat = 0.0;  // global regression coefficient used
  VarianceDiagnostics diagnostics;

  const Rational& selected_h() const { return grid[selected]; }
};

// Per-threshold estimate/bias/variance triples and the MSE-minimizing
// threshold. Infeasible thresholds (zero marginal, empty arm) are skipped;
// throws data_error when no threshold is feasible. probs may be null for the
// difference-in-means family.
MseProfile mse_profile(const OutcomeVector& y, const Assignment& a,
                       const ExposureProfile& e,
                       const ExposureProbabilities* probs,
                       const ThresholdGrid& grid, Family family,
                       BiasMode bias_mode, const EstimationSet& set);

// Argmin of mse_hat over feasible entries, ties broken toward smaller h.
std::size_t select_min_mse(std::span<const ThresholdStats> stats);

// Scanning downward from h = 1, the smallest grid index whose interval
// family {tau_h' +- 2 sdev_h' : h' >= h} still has a common point; the top
// threshold itself when even its immediate extension fails.
std::size_t lepski_select(std::span<const double> estimates,
                          std::span<const double> sdevs,
                          std::span<const std::uint8_t> feasible);
std::size_t lepski_select(const MseProfile& profile);

struct EstimatorReport {
  Family family = Family::horvitz_thompson;
  ThresholdRule rule = ThresholdRule::fixed_zero;
  double estimate = 0.0;
  std::size_t chosen_index = 0;
  Rational chosen_h;
  std::int32_t dropped_units = 0;       // graph nodes outside the set
  std::int64_t zero_probability_cells = 0;
};

EstimatorReport estimate_with_rule(ThresholdRule rule, Family family,
                                   BiasMode bias_mode, const OutcomeVector& y,
                                   const Assignment& a,
                                   const ExposureProfile& e,
                                   const ExposureProbabilities* probs,
                                   const ThresholdGrid& grid,
                                   const EstimationSet& set);

}  // namespace adathresh
