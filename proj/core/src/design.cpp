#include "adathresh/design.hpp"

#include <bit>
#include <cmath>

#include "adathresh/errors.hpp"
#include "adathresh/rng.hpp"

namespace adathresh {

namespace {

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw config_error("treatment probability must satisfy 0 < p < 1, got " +
                       std::to_string(p));
}

}  // namespace

Design Design::unit_bernoulli(double p) {
  check_probability(p);
  Design d;
  d.kind = DesignKind::unit_bernoulli;
  d.p = p;
  return d;
}

Design Design::cluster_bernoulli(double p,
                                 std::shared_ptr<const Clustering> clustering) {
  check_probability(p);
  if (!clustering) throw config_error("cluster design requires a clustering");
  Design d;
  d.kind = DesignKind::cluster_bernoulli;
  d.p = p;
  d.clustering = std::move(clustering);
  return d;
}

std::int32_t Design::coin_count(const Graph& g) const {
  return kind == DesignKind::unit_bernoulli ? g.n()
                                            : clustering->cluster_count();
}

void Design::validate(const Graph& g) const {
  check_probability(p);
  if (kind == DesignKind::cluster_bernoulli) {
    if (!clustering) throw config_error("cluster design requires a clustering");
    if (static_cast<std::int32_t>(clustering->cluster_of.size()) != g.n())
      throw config_error("clustering does not cover the graph");
  }
}

std::string Design::describe() const {
  if (kind == DesignKind::unit_bernoulli)
    return "unit-bernoulli(p=" + std::to_string(p) + ")";
  return "cluster-bernoulli(p=" + std::to_string(p) +
         ",clusters=" + std::to_string(clustering->cluster_count()) +
         ",hash=" + std::to_string(clustering->hash()) + ")";
}

Assignment sample_assignment(const Design& design, const Graph& g,
                             std::uint64_t seed, std::int64_t replicate) {
  design.validate(g);
  Assignment a;
  a.seed = seed;
  a.replicate = replicate;
  a.z.resize(g.n());
  const std::uint64_t s = purpose_seed(seed, rng_purpose::kAssignment);
  const auto coin = [&](std::int64_t index) {
    return uniform01(s, static_cast<std::uint64_t>(replicate),
                     static_cast<std::uint64_t>(index)) < design.p;
  };
  if (design.kind == DesignKind::unit_bernoulli) {
    for (std::int32_t i = 0; i < g.n(); ++i) a.z[i] = coin(i) ? 1 : 0;
  } else {
    const auto& clustering = *design.clustering;
    std::vector<std::uint8_t> cluster_z(clustering.cluster_count());
    for (std::int32_t c = 0; c < clustering.cluster_count(); ++c)
      cluster_z[c] = coin(c) ? 1 : 0;
    for (std::int32_t i = 0; i < g.n(); ++i)
      a.z[i] = cluster_z[clustering.cluster_of[i]];
  }
  return a;
}

std::uint64_t assignment_space_size(const Design& design, const Graph& g,
                                    std::uint64_t cap) {
  const std::int32_t m = design.coin_count(g);
  if (m >= 63 || (1ull << m) > cap) throw enumeration_cap_error(m, cap);
  return 1ull << m;
}

void enumerate_assignment_range(
    const Design& design, const Graph& g, std::uint64_t begin,
    std::uint64_t end,
    const std::function<void(const std::vector<std::uint8_t>&, double)>& fn) {
  design.validate(g);
  const std::int32_t m = design.coin_count(g);
  // probability by treated-coin count
  std::vector<double> prob_by_count(m + 1);
  for (std::int32_t t = 0; t <= m; ++t)
    prob_by_count[t] = std::pow(design.p, t) * std::pow(1.0 - design.p, m - t);

  std::vector<std::uint8_t> z(g.n());
  for (std::uint64_t mask = begin; mask < end; ++mask) {
    if (design.kind == DesignKind::unit_bernoulli) {
      for (std::int32_t i = 0; i < m; ++i) z[i] = (mask >> i) & 1;
    } else {
      const auto& clustering = *design.clustering;
      for (std::int32_t i = 0; i < g.n(); ++i)
        z[i] = (mask >> clustering.cluster_of[i]) & 1;
    }
    fn(z, prob_by_count[std::popcount(mask)]);
  }
}

void enumerate_assignments(
    const Design& design, const Graph& g,
    const std::function<void(const std::vector<std::uint8_t>&, double)>& fn,
    std::uint64_t cap) {
  const std::uint64_t total = assignment_space_size(design, g, cap);
  enumerate_assignment_range(design, g, 0, total, fn);
}

}  // namespace adathresh
