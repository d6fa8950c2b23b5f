#include "adathresh/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adathresh {

EstimationSet EstimationSet::all(std::int32_t n) {
  EstimationSet set;
  set.units.resize(n);
  std::iota(set.units.begin(), set.units.end(), 0);
  set.member.assign(n, 1);
  return set;
}

EstimationSet EstimationSet::of(std::vector<std::int32_t> units,
                                std::int32_t n_graph) {
  EstimationSet set;
  set.member.assign(n_graph, 0);
  for (const std::int32_t i : units) {
    if (i < 0 || i >= n_graph)
      throw config_error("estimation unit out of range: " + std::to_string(i));
    if (set.member[i]) throw config_error("duplicate estimation unit");
    set.member[i] = 1;
  }
  std::sort(units.begin(), units.end());
  set.units = std::move(units);
  return set;
}

std::string to_string(Family f) {
  return f == Family::horvitz_thompson ? "ht" : "dim";
}
std::string to_string(BiasMode m) {
  return m == BiasMode::global ? "global" : "local";
}
std::string to_string(ThresholdRule r) {
  switch (r) {
    case ThresholdRule::fixed_zero: return "fixed-0";
    case ThresholdRule::fixed_one: return "fixed-1";
    case ThresholdRule::adaptive: return "adaptive";
    case ThresholdRule::lepski: return "lepski";
  }
  return "?";
}

namespace {

void require_positivity(const ExposureProbabilities& probs, std::size_t k,
                        const EstimationSet& set) {
  for (const std::int32_t i : set.units)
    if (!(probs.m1(i, k) > 0.0) || !(probs.m0(i, k) > 0.0))
      throw positivity_error(i, probs.grid[k].str());
}

void require_defined_exposures(const ExposureProfile& e,
                               const EstimationSet& set) {
  for (const std::int32_t i : set.units)
    if (e.degree[i] == 0)
      throw data_error("isolated node " + std::to_string(i) +
                       " in the estimation set has no exposure fraction");
}

}  // namespace

double ht_estimate(const OutcomeVector& y, const Assignment& a,
                   const ExposureProfile& e, const ExposureProbabilities& probs,
                   std::size_t k, const EstimationSet& set) {
  require_defined_exposures(e, set);
  require_positivity(probs, k, set);
  const Rational& h = probs.grid[k];
  double sum = 0.0;
  for (const std::int32_t i : set.units) {
    if (a.z[i]) {
      if (e.treated_exposed(i, h)) sum += y[i] / probs.m1(i, k);
    } else {
      if (e.control_exposed(i, h)) sum -= y[i] / probs.m0(i, k);
    }
  }
  return sum / set.size();
}

double ht_bandwidth_form(const OutcomeVector& y, const Assignment& a,
                         const ExposureProfile& e,
                         const ExposureProbabilities& probs,
                         const Rational& bandwidth, const EstimationSet& set) {
  const Rational h = one_minus(bandwidth);
  const std::size_t k = probs.grid.index_of(h);
  if (k == ThresholdGrid::npos)
    throw config_error("bandwidth " + bandwidth.str() +
                       " has no matching grid threshold " + h.str());
  require_defined_exposures(e, set);
  require_positivity(probs, k, set);
  double sum = 0.0;
  for (const std::int32_t i : set.units) {
    // |z_i - e_i| as a rational: 1 - e for treated units, e for controls.
    if (a.z[i]) {
      const std::int64_t dist_num = e.degree[i] - e.treated[i];
      if (static_cast<__int128>(dist_num) * bandwidth.den <=
          static_cast<__int128>(bandwidth.num) * e.degree[i])
        sum += y[i] / probs.m1(i, k);
    } else {
      if (exposure_at_most(e.treated[i], e.degree[i], bandwidth))
        sum -= y[i] / probs.m0(i, k);
    }
  }
  return sum / set.size();
}

double dim_estimate(const OutcomeVector& y, const Assignment& a,
                    const ExposureProfile& e, const Rational& h,
                    const EstimationSet& set) {
  require_defined_exposures(e, set);
  double sum1 = 0.0, sum0 = 0.0;
  std::int64_t n1 = 0, n0 = 0;
  for (const std::int32_t i : set.units) {
    if (a.z[i]) {
      if (e.treated_exposed(i, h)) {
        sum1 += y[i];
        ++n1;
      }
    } else {
      if (e.control_exposed(i, h)) {
        sum0 += y[i];
        ++n0;
      }
    }
  }
  if (n1 == 0) throw empty_arm_error("treated", h.str());
  if (n0 == 0) throw empty_arm_error("control", h.str());
  return sum1 / n1 - sum0 / n0;
}

namespace {

// Gaussian elimination with partial pivoting on the normal equations.
// Returns false when a pivot collapses (rank-deficient window).
bool solve_normal_equations(std::vector<std::vector<double>> xtx,
                            std::vector<double> xty,
                            std::vector<double>& out) {
  const std::size_t m = xty.size();
  double scale = 0.0;
  for (const auto& row : xtx)
    for (const double v : row) scale = std::max(scale, std::abs(v));
  const double tol = std::max(scale, 1.0) * 1e-12;

  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(xtx[r][col]) > std::abs(xtx[pivot][col])) pivot = r;
    if (std::abs(xtx[pivot][col]) <= tol) return false;
    std::swap(xtx[pivot], xtx[col]);
    std::swap(xty[pivot], xty[col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = xtx[r][col] / xtx[col][col];
      for (std::size_t c = col; c < m; ++c) xtx[r][c] -= f * xtx[col][c];
      xty[r] -= f * xty[col];
    }
  }
  out.assign(m, 0.0);
  for (std::size_t r = m; r-- > 0;) {
    double v = xty[r];
    for (std::size_t c = r + 1; c < m; ++c) v -= xtx[r][c] * out[c];
    out[r] = v / xtx[r][r];
  }
  return true;
}

}  // namespace

OlsFit ols_fit(const OutcomeVector& y, const Assignment& a,
               const ExposureProfile& e, const Rational& window_lo,
               const Rational& window_hi, Arm arm, const EstimationSet& set) {
  OlsFit fit;
  std::vector<std::int32_t> used;
  for (const std::int32_t i : set.units) {
    if (arm == Arm::treated && !a.z[i]) continue;
    if (arm == Arm::control && a.z[i]) continue;
    if (!exposure_at_least(e.treated[i], e.degree[i], window_lo)) continue;
    if (!exposure_at_most(e.treated[i], e.degree[i], window_hi)) continue;
    used.push_back(i);
  }
  fit.n_used = static_cast<std::int32_t>(used.size());

  const bool with_treatment = arm == Arm::both;
  const std::size_t m = with_treatment ? 3 : 2;
  if (used.size() < m) {
    fit.degenerate = true;
    return fit;
  }

  std::vector<std::vector<double>> xtx(m, std::vector<double>(m, 0.0));
  std::vector<double> xty(m, 0.0);
  for (const std::int32_t i : used) {
    const double ei = e.fraction(i);
    double row[3] = {1.0, 0.0, 0.0};
    if (with_treatment) {
      row[1] = static_cast<double>(a.z[i]);
      row[2] = ei;
    } else {
      row[1] = ei;
    }
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) xtx[r][c] += row[r] * row[c];
      xty[r] += row[r] * y[i];
    }
  }

  std::vector<double> coef;
  if (!solve_normal_equations(std::move(xtx), std::move(xty), coef)) {
    fit.degenerate = true;
    return fit;
  }
  fit.intercept = coef[0];
  if (with_treatment) {
    fit.treatment = coef[1];
    fit.exposure = coef[2];
  } else {
    fit.exposure = coef[1];
  }
  return fit;
}

double ht_bias_signal(const ExposureProfile& e, const Assignment& a,
                      double gamma_treated, double gamma_control,
                      const ExposureProbabilities& probs, std::size_t k,
                      const EstimationSet& set) {
  require_positivity(probs, k, set);
  const Rational& h = probs.grid[k];
  double sum = 0.0;
  for (const std::int32_t i : set.units) {
    const double ei = e.fraction(i);
    if (a.z[i]) {
      if (e.treated_exposed(i, h))
        sum += (1.0 - ei) * gamma_treated / probs.m1(i, k);
    } else {
      if (e.control_exposed(i, h)) sum += ei * gamma_control / probs.m0(i, k);
    }
  }
  return sum / set.size();
}

double dim_bias_signal(const ExposureProfile& e, const Assignment& a,
                       double gamma_treated, double gamma_control,
                       const Rational& h, const EstimationSet& set) {
  double sum1 = 0.0, sum0 = 0.0;
  std::int64_t n1 = 0, n0 = 0;
  for (const std::int32_t i : set.units) {
    const double ei = e.fraction(i);
    if (a.z[i]) {
      if (e.treated_exposed(i, h)) {
        sum1 += (1.0 - ei) * gamma_treated;
        ++n1;
      }
    } else {
      if (e.control_exposed(i, h)) {
        sum0 += ei * gamma_control;
        ++n0;
      }
    }
  }
  if (n1 == 0) throw empty_arm_error("treated", h.str());
  if (n0 == 0) throw empty_arm_error("control", h.str());
  return sum1 / n1 + sum0 / n0;
}

double ht_variance_estimate(const OutcomeVector& y, const Assignment& a,
                            const ExposureProfile& e,
                            const ExposureProbabilities& probs, std::size_t k,
                            const EstimationSet& set,
                            VarianceDiagnostics* diag) {
  if (!probs.joints_computed)
    throw data_error("probability table lacks pairwise joints; the variance "
                     "estimator needs a table with joints");
  require_defined_exposures(e, set);
  require_positivity(probs, k, set);
  const Rational& h = probs.grid[k];
  const double n = set.size();
  const double n2 = n * n;

  std::vector<std::uint8_t> T(set.member.size(), 0), C(set.member.size(), 0);
  for (const std::int32_t i : set.units) {
    if (a.z[i])
      T[i] = e.treated_exposed(i, h);
    else
      C[i] = e.control_exposed(i, h);
  }

  double v = 0.0;
  for (const std::int32_t i : set.units) {
    const double yi2 = y[i] * y[i];
    if (T[i]) {
      const double p1 = probs.m1(i, k);
      v += yi2 / (n2 * p1) * (1.0 / p1 - 1.0);
      // own pair: a unit is never exposure-qualified in both arms, so the
      // (i,i) cross term always routes through the conservative correction
      v += yi2 / (n2 * p1);
    } else if (C[i]) {
      const double p0 = probs.m0(i, k);
      v += yi2 / (n2 * p0) * (1.0 / p0 - 1.0);
      v += yi2 / (n2 * p0);
    }
  }

  std::int64_t zero_cells = 0;
  for (std::size_t pidx = 0; pidx < probs.pairs.size(); ++pidx) {
    const auto [i, j] = probs.pairs[pidx];
    if (!set.member[i] || !set.member[j]) continue;

    if (T[i] && T[j]) {
      const double p11 = probs.j11(pidx, k);
      if (!(p11 > 0.0)) throw inconsistency_error(i, j, h.str());
      v += 2.0 * y[i] * y[j] / (n2 * p11) *
           (p11 / (probs.m1(i, k) * probs.m1(j, k)) - 1.0);
    }
    if (C[i] && C[j]) {
      const double p00 = probs.j00(pidx, k);
      if (!(p00 > 0.0)) throw inconsistency_error(i, j, h.str());
      v += 2.0 * y[i] * y[j] / (n2 * p00) *
           (p00 / (probs.m0(i, k) * probs.m0(j, k)) - 1.0);
    }

    // ordered (i, j): i in the treated class, j in the control class
    const double p10 = probs.j10(pidx, k);
    if (p10 > 0.0) {
      if (T[i] && C[j])
        v -= 2.0 / n2 * y[i] * y[j] *
             (1.0 / (probs.m1(i, k) * probs.m0(j, k)) - 1.0 / p10);
    } else {
      if (T[i] && C[j]) throw inconsistency_error(i, j, h.str());
      ++zero_cells;
      if (T[i]) v += y[i] * y[i] / (n2 * probs.m1(i, k));
      if (C[j]) v += y[j] * y[j] / (n2 * probs.m0(j, k));
    }
    // ordered (j, i)
    const double p01 = probs.j01(pidx, k);
    if (p01 > 0.0) {
      if (T[j] && C[i])
        v -= 2.0 / n2 * y[j] * y[i] *
             (1.0 / (probs.m1(j, k) * probs.m0(i, k)) - 1.0 / p01);
    } else {
      if (T[j] && C[i]) throw inconsistency_error(j, i, h.str());
      ++zero_cells;
      if (T[j]) v += y[j] * y[j] / (n2 * probs.m1(j, k));
      if (C[i]) v += y[i] * y[i] / (n2 * probs.m0(i, k));
    }
  }
  if (diag) diag->zero_joint_cells += zero_cells;
  return v;
}

double dim_variance_estimate(const OutcomeVector& y, const Assignment& a,
                             const ExposureProfile& e, const Rational& h,
                             const EstimationSet& set) {
  require_defined_exposures(e, set);
  const std::int64_t n = set.size();
  if (n < 2) throw data_error("difference-in-means variance needs n >= 2");
  std::int64_t n1 = 0, n0 = 0;
  double sum1 = 0.0, sum0 = 0.0;
  std::vector<std::uint8_t> T(set.member.size(), 0), C(set.member.size(), 0);
  for (const std::int32_t i : set.units) {
    if (a.z[i] && e.treated_exposed(i, h)) {
      T[i] = 1;
      ++n1;
      sum1 += y[i];
    } else if (!a.z[i] && e.control_exposed(i, h)) {
      C[i] = 1;
      ++n0;
      sum0 += y[i];
    }
  }
  if (n1 == 0) throw empty_arm_error("treated", h.str());
  if (n0 == 0) throw empty_arm_error("control", h.str());

  // indicator-masked means and deviations, summed over the whole set
  const double mean1 = sum1 / n1;
  const double mean0 = sum0 / n0;
  double vT = 0.0, vC = 0.0;
  for (const std::int32_t i : set.units) {
    const double masked1 = T[i] ? y[i] : 0.0;
    const double masked0 = C[i] ? y[i] : 0.0;
    vT += (masked1 - mean1) * (masked1 - mean1);
    vC += (masked0 - mean0) * (masked0 - mean0);
  }
  vT /= n1;
  vC /= n0;
  return 2.0 / (n - 1) * (vT + vC);
}

namespace {

struct GammaPair {
  double treated;
  double control;
};

GammaPair local_gammas(const OutcomeVector& y, const Assignment& a,
                       const ExposureProfile& e, const ThresholdGrid& grid,
                       std::size_t k, double global_gamma,
                       const EstimationSet& set) {
  const Rational& h = grid[k];
  const Rational lo0(0, 1), hi1(1, 1);
  const OlsFit treated =
      ols_fit(y, a, e, h, hi1, Arm::treated, set);
  const OlsFit control =
      ols_fit(y, a, e, lo0, one_minus(h), Arm::control, set);
  // degenerate windows fall back to the global coefficient
  return {treated.degenerate ? global_gamma : treated.exposure,
          control.degenerate ? global_gamma : control.exposure};
}

std::vector<ThresholdStats> per_threshold_stats(
    const OutcomeVector& y, const Assignment& a, const ExposureProfile& e,
    const ExposureProbabilities* probs, const ThresholdGrid& grid,
    Family family, BiasMode bias_mode, const EstimationSet& set,
    bool want_bias, double* gamma_hat_out, VarianceDiagnostics* diag) {
  if (family == Family::horvitz_thompson) {
    if (probs == nullptr)
      throw config_error("the inverse-propensity family needs a probability table");
    if (!(probs->grid == grid))
      throw config_error("probability table grid does not match the profile grid");
  }

  double global_gamma = 0.0;
  if (want_bias) {
    const OlsFit global =
        ols_fit(y, a, e, Rational(0, 1), Rational(1, 1), Arm::both, set);
    if (global.degenerate)
      throw data_error("global regression on (1, z, e) is rank-deficient");
    global_gamma = global.exposure;
  }
  if (gamma_hat_out) *gamma_hat_out = global_gamma;

  std::vector<ThresholdStats> stats(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    ThresholdStats& s = stats[k];
    try {
      GammaPair gammas{global_gamma, global_gamma};
      if (want_bias && bias_mode == BiasMode::local)
        gammas = local_gammas(y, a, e, grid, k, global_gamma, set);
      if (family == Family::horvitz_thompson) {
        s.tau = ht_estimate(y, a, e, *probs, k, set);
        s.var_hat = ht_variance_estimate(y, a, e, *probs, k, set, diag);
        if (want_bias)
          s.bias_hat = ht_bias_signal(e, a, gammas.treated, gammas.control,
                                      *probs, k, set);
      } else {
        s.tau = dim_estimate(y, a, e, grid[k], set);
        s.var_hat = dim_variance_estimate(y, a, e, grid[k], set);
        if (want_bias)
          s.bias_hat = dim_bias_signal(e, a, gammas.treated, gammas.control,
                                       grid[k], set);
      }
      s.mse_hat = s.bias_hat * s.bias_hat + s.var_hat;
      s.feasible = true;
    } catch (const positivity_error&) {
      s.feasible = false;
    } catch (const empty_arm_error&) {
      s.feasible = false;
    }
  }
  return stats;
}

}  // namespace

std::size_t select_min_mse(std::span<const ThresholdStats> stats) {
  std::size_t best = ThresholdGrid::npos;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    if (!stats[k].feasible) continue;
    if (best == ThresholdGrid::npos || stats[k].mse_hat < stats[best].mse_hat)
      best = k;
  }
  if (best == ThresholdGrid::npos)
    throw data_error("no feasible threshold in the profile");
  return best;
}

MseProfile mse_profile(const OutcomeVector& y, const Assignment& a,
                       const ExposureProfile& e,
                       const ExposureProbabilities* probs,
                       const ThresholdGrid& grid, Family family,
                       BiasMode bias_mode, const EstimationSet& set) {
  MseProfile profile;
  profile.grid = grid;
  profile.family = family;
  profile.bias_mode = bias_mode;
  profile.at = per_threshold_stats(y, a, e, probs, grid, family, bias_mode,
                                   set, /*want_bias=*/true,
                                   &profile.gamma_hat, &profile.diagnostics);
  profile.selected = select_min_mse(profile.at);
  return profile;
}

std::size_t lepski_select(std::span<const double> estimates,
                          std::span<const double> sdevs,
                          std::span<const std::uint8_t> feasible) {
  std::vector<std::size_t> order;  // feasible indices, ascending h
  for (std::size_t k = 0; k < estimates.size(); ++k)
    if (feasible[k]) order.push_back(k);
  if (order.empty()) throw data_error("no feasible threshold for the scan");

  std::size_t chosen = order.back();
  double lo = estimates[chosen] - 2.0 * sdevs[chosen];
  double hi = estimates[chosen] + 2.0 * sdevs[chosen];
  for (std::size_t x = order.size() - 1; x-- > 0;) {
    const std::size_t k = order[x];
    lo = std::max(lo, estimates[k] - 2.0 * sdevs[k]);
    hi = std::min(hi, estimates[k] + 2.0 * sdevs[k]);
    if (lo > hi) break;
    chosen = k;
  }
  return chosen;
}

std::size_t lepski_select(const MseProfile& profile) {
  std::vector<double> estimates(profile.at.size()), sdevs(profile.at.size());
  std::vector<std::uint8_t> feasible(profile.at.size());
  for (std::size_t k = 0; k < profile.at.size(); ++k) {
    estimates[k] = profile.at[k].tau;
    sdevs[k] = std::sqrt(std::max(profile.at[k].var_hat, 0.0));
    feasible[k] = profile.at[k].feasible;
  }
  return lepski_select(estimates, sdevs, feasible);
}

EstimatorReport estimate_with_rule(ThresholdRule rule, Family family,
                                   BiasMode bias_mode, const OutcomeVector& y,
                                   const Assignment& a,
                                   const ExposureProfile& e,
                                   const ExposureProbabilities* probs,
                                   const ThresholdGrid& grid,
                                   const EstimationSet& set) {
  EstimatorReport report;
  report.family = family;
  report.rule = rule;
  report.dropped_units =
      static_cast<std::int32_t>(a.z.size()) - set.size();

  const auto point_estimate = [&](std::size_t k) {
    return family == Family::horvitz_thompson
               ? ht_estimate(y, a, e, *probs, k, set)
               : dim_estimate(y, a, e, grid[k], set);
  };

  switch (rule) {
    case ThresholdRule::fixed_zero:
      report.chosen_index = 0;
      report.estimate = point_estimate(0);
      break;
    case ThresholdRule::fixed_one:
      report.chosen_index = grid.size() - 1;
      report.estimate = point_estimate(report.chosen_index);
      break;
    case ThresholdRule::adaptive: {
      const MseProfile profile =
          mse_profile(y, a, e, probs, grid, family, bias_mode, set);
      report.chosen_index = profile.selected;
      report.estimate = profile.at[profile.selected].tau;
      report.zero_probability_cells = profile.diagnostics.zero_joint_cells;
      break;
    }
    case ThresholdRule::lepski: {
      VarianceDiagnostics diag;
      const auto stats =
          per_threshold_stats(y, a, e, probs, grid, family, bias_mode, set,
                              /*want_bias=*/false, nullptr, &diag);
      std::vector<double> estimates(stats.size()), sdevs(stats.size());
      std::vector<std::uint8_t> feasible(stats.size());
      for (std::size_t k = 0; k < stats.size(); ++k) {
        estimates[k] = stats[k].tau;
        sdevs[k] = std::sqrt(std::max(stats[k].var_hat, 0.0));
        feasible[k] = stats[k].feasible;
      }
      report.chosen_index = lepski_select(estimates, sdevs, feasible);
      report.estimate = stats[report.chosen_index].tau;
      report.zero_probability_cells = diag.zero_joint_cells;
      break;
    }
  }
  report.chosen_h = grid[report.chosen_index];
  return report;
}

}  // namespace adathresh
