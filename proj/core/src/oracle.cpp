#include "adathresh/oracle.hpp"

#include <cmath>

#include "parallel.hpp"

namespace adathresh {

std::string to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::enumeration: return "enumeration";
    case OracleMethod::monte_carlo: return "monte-carlo";
    case OracleMethod::closed_form: return "closed-form";
  }
  return "?";
}

double prop1_bias(int k, int l, double gamma) {
  if (k < 1 || k > 30) throw config_error("cycle power k must be in [1, 30]");
  if (l < 0 || l > 2 * k)
    throw config_error("threshold index l must be in [0, 2k]");
  if (l % 2 != 0)
    throw config_error("closed-form bias is defined on even l only; "
                       "odd l is not interpolated");
  // binomials C(2k, r) fit in 64 bits for k <= 30
  const int d = 2 * k;
  std::vector<std::int64_t> binom(d + 1);
  binom[0] = 1;
  for (int r = 1; r <= d; ++r)
    binom[r] = binom[r - 1] * (d - r + 1) / r;

  std::int64_t s0 = 0;  // sum of C(2k, r)
  std::int64_t s1 = 0;  // sum of (r - k) C(2k, r)
  for (int r = l; r <= d; ++r) {
    s0 += binom[r];
    s1 += (r - k) * binom[r];
  }
  // gamma * (s1 / (k s0) - 1), evaluated as one exact ratio
  const std::int64_t num = s1 - static_cast<std::int64_t>(k) * s0;
  const std::int64_t den = static_cast<std::int64_t>(k) * s0;
  return gamma * (static_cast<double>(num) / static_cast<double>(den));
}

ScaleRef prop2_var_scale(int k, double h, double alpha, double beta,
                         double gamma, double n, double p) {
  if (!(0.0 <= h && h <= 1.0)) throw config_error("h must lie in [0, 1]");
  const double d = 2.0 * k;
  const double treated = alpha + beta + gamma * d * h;
  const double control = alpha + beta + gamma * d * (1.0 - h);
  const double bracket =
      treated * treated + control * control - 2.0 * gamma * h * (1.0 - h) * d;
  return {bracket / (n * std::pow(p, d * h)), true};
}

ScaleRef prop3_bias(double h, double gamma, bool derivation_variant) {
  if (h < 0.5)
    throw config_error("cluster-randomization bias reference requires h >= 1/2");
  return {2.0 * gamma * (h - (derivation_variant ? 2.0 : 1.0)), true};
}

ScaleRef prop4_var_scale(int d, double h, double beta, double gamma, double n,
                         double p) {
  if (!(0.0 <= h && h <= 1.0)) throw config_error("h must lie in [0, 1]");
  const double treated = beta + gamma * h;
  const double control = gamma * (1.0 - h);
  return {(3.0 * d + 1.0 - 2.0 * d * h) *
              (treated * treated + control * control) / (n * p * p),
          true};
}

namespace {

// compensated accumulation: enumeration adds up to 2^22 weighted terms and
// the acceptance tolerances sit at 1e-10
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

struct Accumulator {
  Kahan mass;  // probability mass (exact) or replicate count (mc)
  Kahan sum;
  Kahan sum_sq;
  std::int64_t excluded = 0;
};

OracleProfile finalize(std::vector<Accumulator> acc, const ThresholdGrid& grid,
                       double tau, OracleMethod method, std::int64_t draws,
                       std::uint64_t seed) {
  OracleProfile profile;
  profile.grid = grid;
  profile.method = method;
  profile.tau = tau;
  profile.draws = draws;
  profile.seed = seed;
  profile.at.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    OracleStats& s = profile.at[k];
    s.excluded = acc[k].excluded;
    if (!(acc[k].mass.sum > 0.0)) continue;
    const double mean = acc[k].sum.sum / acc[k].mass.sum;
    const double second = acc[k].sum_sq.sum / acc[k].mass.sum;
    s.bias = mean - tau;
    s.var = std::max(second - mean * mean, 0.0);
    s.mse = s.bias * s.bias + s.var;
    s.rmse_over_ate = tau != 0.0
                          ? std::sqrt(s.mse) / std::abs(tau)
                          : std::numeric_limits<double>::quiet_NaN();
    s.feasible = true;
  }
  std::size_t best = ThresholdGrid::npos;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!profile.at[k].feasible) continue;
    if (best == ThresholdGrid::npos || profile.at[k].mse < profile.at[best].mse)
      best = k;
  }
  if (best == ThresholdGrid::npos)
    throw data_error("oracle: no feasible threshold");
  profile.h_star = best;
  return profile;
}

double estimate_at(Family family, const OutcomeVector& y, const Assignment& a,
                   const ExposureProfile& e, const ExposureProbabilities& probs,
                   const ThresholdGrid& grid, std::size_t k,
                   const EstimationSet& set) {
  return family == Family::horvitz_thompson
             ? ht_estimate(y, a, e, probs, k, set)
             : dim_estimate(y, a, e, grid[k], set);
}

}  // namespace

OracleProfile exact_mse(const Graph& g, const Design& design,
                        const OutcomeModel& model,
                        const ExposureProbabilities& probs,
                        const ThresholdGrid& grid, Family family,
                        const EstimationSet& set, std::uint64_t cap) {
  if (!(probs.grid == grid))
    throw config_error("probability table grid does not match the oracle grid");
  const double tau = true_ate(model);
  std::vector<Accumulator> acc(grid.size());
  enumerate_assignments(
      design, g,
      [&](const std::vector<std::uint8_t>& z, double pr) {
        Assignment a;
        a.z = z;
        const ExposureProfile e =
            exposure_fractions(g, a, IsolatedPolicy::drop);
        const OutcomeVector y = evaluate(model, a, e);
        for (std::size_t k = 0; k < grid.size(); ++k) {
          try {
            const double t = estimate_at(family, y, a, e, probs, grid, k, set);
            acc[k].mass.add(pr);
            acc[k].sum.add(pr * t);
            acc[k].sum_sq.add(pr * t * t);
          } catch (const positivity_error&) {
            ++acc[k].excluded;
          } catch (const empty_arm_error&) {
            ++acc[k].excluded;
          }
        }
      },
      cap);
  return finalize(std::move(acc), grid, tau, OracleMethod::enumeration, 0, 0);
}

OracleProfile mc_mse(const Graph& g, const Design& design,
                     const OutcomeModel& model,
                     const ExposureProbabilities& probs,
                     const ThresholdGrid& grid, std::int64_t replicates,
                     std::uint64_t seed, Family family,
                     const EstimationSet& set, int threads) {
  if (replicates < 2) throw config_error("mc oracle requires >= 2 replicates");
  if (!(probs.grid == grid))
    throw config_error("probability table grid does not match the oracle grid");
  const double tau = true_ate(model);
  const std::size_t G = grid.size();

  // per-replicate values, reduced in replicate order afterwards so the
  // result is identical for any worker count
  std::vector<double> values(static_cast<std::size_t>(replicates) * G,
                             std::numeric_limits<double>::quiet_NaN());
  detail::parallel_chunks(replicates, threads, [&](int, std::int64_t begin,
                                                   std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      const Assignment a = sample_assignment(design, g, seed, r);
      const ExposureProfile e = exposure_fractions(g, a, IsolatedPolicy::drop);
      const OutcomeVector y = evaluate(model, a, e);
      for (std::size_t k = 0; k < G; ++k) {
        try {
          values[static_cast<std::size_t>(r) * G + k] =
              estimate_at(family, y, a, e, probs, grid, k, set);
        } catch (const positivity_error&) {
        } catch (const empty_arm_error&) {
        }
      }
    }
  });

  std::vector<Accumulator> acc(G);
  for (std::int64_t r = 0; r < replicates; ++r) {
    for (std::size_t k = 0; k < G; ++k) {
      const double t = values[static_cast<std::size_t>(r) * G + k];
      if (std::isnan(t)) {
        ++acc[k].excluded;
        continue;
      }
      acc[k].mass.add(1.0);
      acc[k].sum.add(t);
      acc[k].sum_sq.add(t * t);
    }
  }
  return finalize(std::move(acc), grid, tau, OracleMethod::monte_carlo,
                  replicates, seed);
}

}  // namespace adathresh
