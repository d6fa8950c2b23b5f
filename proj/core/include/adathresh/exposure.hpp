#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adathresh/design.hpp"
#include "adathresh/graph.hpp"
#include "adathresh/rational.hpp"

namespace adathresh {

// Per-unit treated-neighbor counts; e_i = treated[i]/degree[i] held as an
// exact integer ratio. The fraction is undefined at degree 0, so isolated
// nodes are rejected by default and may only be carried (never queried)
// under the drop policy.
enum class IsolatedPolicy { reject, drop };

struct ExposureProfile {
  std::vector<std::int32_t> treated;
  std::vector<std::int32_t> degree;

  std::int32_t n() const { return static_cast<std::int32_t>(treated.size()); }
  double fraction(std::int32_t i) const;  // throws on degree 0
  bool treated_exposed(std::int32_t i, const Rational& h) const {
    return exposure_at_least(treated[i], degree[i], h);
  }
  bool control_exposed(std::int32_t i, const Rational& h) const {
    return exposure_at_most_complement(treated[i], degree[i], h);
  }
};

ExposureProfile exposure_fractions(const Graph& g, const Assignment& a,
                                   IsolatedPolicy policy = IsolatedPolicy::reject);

enum class ProbSource { exact_marginals, monte_carlo, enumeration };

std::string to_string(ProbSource s);

// Exposure probabilities on a threshold grid:
//   marginal1[i][k] = P(z_i = 1, e_i >= h_k)
//   marginal0[i][k] = P(z_i = 0, e_i <= 1 - h_k)
// plus the four pairwise joints on the dependent-pair set. Pairs absent from
// the table are independent by construction and factor as products of
// marginals.
struct ExposureProbabilities {
  ThresholdGrid grid;
  std::int32_t n = 0;
  std::vector<double> marginal1;  // n x grid, row-major
  std::vector<double> marginal0;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;  // i < j, sorted
  std::vector<double> joint11;  // pairs x grid
  std::vector<double> joint00;
  std::vector<double> joint10;  // i in the treated class, j in the control class
  std::vector<double> joint01;
  bool joints_computed = false;  // false for marginal-only tables
  std::int64_t draws = 0;        // 0 when exact
  std::uint64_t seed = 0;
  ProbSource source = ProbSource::exact_marginals;

  double m1(std::int32_t i, std::size_t k) const {
    return marginal1[static_cast<std::size_t>(i) * grid.size() + k];
  }
  double m0(std::int32_t i, std::size_t k) const {
    return marginal0[static_cast<std::size_t>(i) * grid.size() + k];
  }
  std::optional<std::size_t> pair_index(std::int32_t i, std::int32_t j) const;

  double j11(std::size_t pair, std::size_t k) const {
    return joint11[pair * grid.size() + k];
  }
  double j00(std::size_t pair, std::size_t k) const {
    return joint00[pair * grid.size() + k];
  }
  double j10(std::size_t pair, std::size_t k) const {
    return joint10[pair * grid.size() + k];
  }
  double j01(std::size_t pair, std::size_t k) const {
    return joint01[pair * grid.size() + k];
  }
};

// Exact marginals for unit-Bernoulli designs: binomial tails of the
// treated-neighbor count. Joints are left empty.
ExposureProbabilities exact_unit_marginals(const Graph& g, double p,
                                           const ThresholdGrid& grid);

// Pairs whose exposure indicators are not independent under the design.
// Unit designs: pairs within graph distance <= 2 (shared coin = shared
// neighbor or own assignment). Cluster designs: pairs sharing any coin
// cluster (own or neighboring), plus the unit-design rule.
std::vector<std::pair<std::int32_t, std::int32_t>> dependent_pairs(
    const Graph& g, const Design& design);

// Empirical frequencies over R independent assignments drawn from the
// counter-based stream keyed by seed; deterministic in seed for any worker
// count. Zero-frequency cells are stored as 0.0 (consumers decide).
// with_joints = false produces a marginal-only table.
ExposureProbabilities mc_probabilities(const Graph& g, const Design& design,
                                       const ThresholdGrid& grid,
                                       std::int64_t draws, std::uint64_t seed,
                                       int threads = 0, bool with_joints = true);

// Exact probabilities (marginals and all dependent-pair joints) by weighted
// enumeration of the full assignment space; tiny graphs only.
ExposureProbabilities enumeration_probabilities(
    const Graph& g, const Design& design, const ThresholdGrid& grid,
    std::uint64_t cap = kDefaultEnumerationCap);

// Replaces the marginal tables of `probs` with exact binomial tails
// (unit designs); joints are kept as-is.
ExposureProbabilities with_exact_marginals(ExposureProbabilities probs,
                                           const Graph& g, double p);

// Versioned binary cache keyed by (graph hash, design, grid, draws, seed).
struct ProbCacheKey {
  std::uint64_t graph_hash = 0;
  std::string design;
  ThresholdGrid grid;
  std::int64_t draws = 0;
  std::uint64_t seed = 0;
};

void save_probabilities(const ExposureProbabilities& probs,
                        const ProbCacheKey& key, const std::string& path);
// Returns nullopt when the file is absent or its key does not match.
std::optional<ExposureProbabilities> load_probabilities(
    const ProbCacheKey& key, const std::string& path);

}  // namespace adathresh
