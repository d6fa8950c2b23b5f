#include "adathresh/exposure.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>

#include "json.hpp"
#include "parallel.hpp"

namespace adathresh {

double ExposureProfile::fraction(std::int32_t i) const {
  if (degree[i] == 0)
    throw data_error("exposure fraction undefined for isolated node " +
                     std::to_string(i));
  return static_cast<double>(treated[i]) / degree[i];
}

ExposureProfile exposure_fractions(const Graph& g, const Assignment& a,
                                   IsolatedPolicy policy) {
  ExposureProfile profile;
  profile.treated.resize(g.n());
  profile.degree.resize(g.n());
  for (std::int32_t i = 0; i < g.n(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty() && policy == IsolatedPolicy::reject)
      throw data_error("isolated node " + std::to_string(i) +
                       " has no exposure fraction (policy: reject)");
    std::int32_t t = 0;
    for (const std::int32_t j : nb) t += a.z[j];
    profile.treated[i] = t;
    profile.degree[i] = static_cast<std::int32_t>(nb.size());
  }
  return profile;
}

std::string to_string(ProbSource s) {
  switch (s) {
    case ProbSource::exact_marginals: return "exact-marginals";
    case ProbSource::monte_carlo: return "monte-carlo";
    case ProbSource::enumeration: return "enumeration";
  }
  return "?";
}

std::optional<std::size_t> ExposureProbabilities::pair_index(
    std::int32_t i, std::int32_t j) const {
  if (i > j) std::swap(i, j);
  const std::pair<std::int32_t, std::int32_t> key{i, j};
  const auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
  if (it == pairs.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - pairs.begin());
}

namespace {

// log P(Bin(d, p) in [lo, hi]), summed stably in shifted log space.
double binomial_range_prob(int d, double p, int lo, int hi) {
  lo = std::max(lo, 0);
  hi = std::min(hi, d);
  if (lo > hi) return 0.0;
  const double logp = std::log(p);
  const double logq = std::log1p(-p);
  const double lgd = std::lgamma(d + 1.0);
  std::vector<double> logs;
  logs.reserve(hi - lo + 1);
  double peak = -std::numeric_limits<double>::infinity();
  for (int r = lo; r <= hi; ++r) {
    const double lg = lgd - std::lgamma(r + 1.0) - std::lgamma(d - r + 1.0) +
                      r * logp + (d - r) * logq;
    logs.push_back(lg);
    peak = std::max(peak, lg);
  }
  double sum = 0.0;
  for (const double lg : logs) sum += std::exp(lg - peak);
  const double value = std::exp(peak) * sum;
  return std::min(value, 1.0);
}

// Smallest t with t/d >= h.
inline std::int64_t min_treated_for(const Rational& h, std::int64_t d) {
  return (h.num * d + h.den - 1) / h.den;
}

// Largest t with t/d <= 1-h.
inline std::int64_t max_treated_complement(const Rational& h, std::int64_t d) {
  return ((h.den - h.num) * d) / h.den;
}

// Per-degree cut indices: c1[t] = largest grid index k with h_k <= t/d, and
// c0[t] = largest k with h_k <= (d-t)/d. The grid starts at 0, so both are
// always defined.
struct CutTable {
  std::vector<std::vector<std::int32_t>> c1_by_degree;

  CutTable(const ThresholdGrid& grid, std::int32_t d_max) {
    c1_by_degree.resize(d_max + 1);
    for (std::int32_t d = 1; d <= d_max; ++d) {
      auto& c1 = c1_by_degree[d];
      c1.resize(d + 1);
      for (std::int32_t t = 0; t <= d; ++t) {
        std::int32_t k = 0;
        while (k + 1 < static_cast<std::int32_t>(grid.size()) &&
               exposure_at_least(t, d, grid[k + 1]))
          ++k;
        c1[t] = k;
      }
    }
  }

  std::int32_t c1(std::int32_t d, std::int32_t t) const {
    return c1_by_degree[d][t];
  }
  std::int32_t c0(std::int32_t d, std::int32_t t) const {
    return c1_by_degree[d][d - t];
  }
};

}  // namespace

ExposureProbabilities exact_unit_marginals(const Graph& g, double p,
                                           const ThresholdGrid& grid) {
  if (!(p > 0.0 && p < 1.0))
    throw config_error("exact marginals require 0 < p < 1");
  ExposureProbabilities probs;
  probs.grid = grid;
  probs.n = g.n();
  probs.source = ProbSource::exact_marginals;
  const std::size_t G = grid.size();
  probs.marginal1.assign(static_cast<std::size_t>(g.n()) * G, 0.0);
  probs.marginal0.assign(static_cast<std::size_t>(g.n()) * G, 0.0);

  // one tail computation per distinct degree
  std::map<std::int32_t, std::pair<std::vector<double>, std::vector<double>>>
      by_degree;
  for (std::int32_t i = 0; i < g.n(); ++i) {
    const std::int32_t d = g.degree(i);
    if (d == 0) continue;
    auto it = by_degree.find(d);
    if (it == by_degree.end()) {
      std::vector<double> m1(G), m0(G);
      for (std::size_t k = 0; k < G; ++k) {
        const auto lo = static_cast<int>(min_treated_for(grid[k], d));
        m1[k] = p * binomial_range_prob(d, p, lo, d);
        const auto hi = static_cast<int>(max_treated_complement(grid[k], d));
        m0[k] = (1.0 - p) * binomial_range_prob(d, p, 0, hi);
      }
      it = by_degree.emplace(d, std::make_pair(std::move(m1), std::move(m0)))
               .first;
    }
    std::copy(it->second.first.begin(), it->second.first.end(),
              probs.marginal1.begin() + static_cast<std::size_t>(i) * G);
    std::copy(it->second.second.begin(), it->second.second.end(),
              probs.marginal0.begin() + static_cast<std::size_t>(i) * G);
  }
  return probs;
}

std::vector<std::pair<std::int32_t, std::int32_t>> dependent_pairs(
    const Graph& g, const Design& design) {
  std::set<std::pair<std::int32_t, std::int32_t>> out;
  const auto add = [&](std::int32_t i, std::int32_t j) {
    if (i == j) return;
    if (g.degree(i) == 0 || g.degree(j) == 0) return;
    out.emplace(std::min(i, j), std::max(i, j));
  };

  // Units within graph distance <= 2 share an assignment coin or a neighbor.
  for (std::int32_t i = 0; i < g.n(); ++i)
    for (const std::int32_t j : g.ball(i, 2))
      if (j > i) add(i, j);

  if (design.kind == DesignKind::cluster_bernoulli) {
    const auto& clustering = *design.clustering;
    const std::int32_t K = clustering.cluster_count();
    // Nodes whose exposure depends on cluster c's coin: members of c plus
    // any node with a neighbor in c.
    std::vector<std::vector<std::int32_t>> listeners(K);
    for (std::int32_t i = 0; i < g.n(); ++i) {
      std::set<std::int32_t> coins{clustering.cluster_of[i]};
      for (const std::int32_t w : g.neighbors(i))
        coins.insert(clustering.cluster_of[w]);
      for (const std::int32_t c : coins) listeners[c].push_back(i);
    }
    for (std::int32_t c = 0; c < K; ++c)
      for (std::size_t a = 0; a < listeners[c].size(); ++a)
        for (std::size_t b = a + 1; b < listeners[c].size(); ++b)
          add(listeners[c][a], listeners[c][b]);

    // Pairs of clusters joined by an edge, every cross pair and same-cluster
    // pair included.
    std::set<std::pair<std::int32_t, std::int32_t>> joined;
    for (std::int32_t i = 0; i < g.n(); ++i)
      for (const std::int32_t j : g.neighbors(i)) {
        const std::int32_t ci = clustering.cluster_of[i];
        const std::int32_t cj = clustering.cluster_of[j];
        if (ci != cj) joined.emplace(std::min(ci, cj), std::max(ci, cj));
      }
    for (std::int32_t c = 0; c < K; ++c)
      for (std::size_t a = 0; a < clustering.clusters[c].size(); ++a)
        for (std::size_t b = a + 1; b < clustering.clusters[c].size(); ++b)
          add(clustering.clusters[c][a], clustering.clusters[c][b]);
    for (const auto& [ca, cb] : joined)
      for (const std::int32_t i : clustering.clusters[ca])
        for (const std::int32_t j : clustering.clusters[cb]) add(i, j);
  }

  return {out.begin(), out.end()};
}

namespace {

struct CountTables {
  std::vector<std::uint32_t> m1, m0, j11, j00, j10, j01;

  CountTables(std::size_t n, std::size_t npairs, std::size_t G)
      : m1(n * G, 0),
        m0(n * G, 0),
        j11(npairs * G, 0),
        j00(npairs * G, 0),
        j10(npairs * G, 0),
        j01(npairs * G, 0) {}
};

// Shared accumulation for Monte Carlo draws and weighted enumeration: each
// unit's indicator over the grid is a prefix of thresholds, so a draw only
// touches one cut bucket per unit/pair; suffix sums recover the tables.
template <typename Weight, typename Tables>
void accumulate_assignment(
    const Graph& g, const std::vector<std::uint8_t>& z,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
    const CutTable& cuts, std::size_t G, Weight w, Tables& tables,
    std::vector<std::int32_t>& cut1, std::vector<std::int32_t>& cut0) {
  for (std::int32_t i = 0; i < g.n(); ++i) {
    const std::int32_t d = g.degree(i);
    if (d == 0) {
      cut1[i] = -1;
      cut0[i] = -1;
      continue;
    }
    std::int32_t t = 0;
    for (const std::int32_t j : g.neighbors(i)) t += z[j];
    cut1[i] = cuts.c1(d, t);
    cut0[i] = cuts.c0(d, t);
    if (z[i])
      tables.m1[static_cast<std::size_t>(i) * G + cut1[i]] += w;
    else
      tables.m0[static_cast<std::size_t>(i) * G + cut0[i]] += w;
  }
  for (std::size_t pidx = 0; pidx < pairs.size(); ++pidx) {
    const auto [i, j] = pairs[pidx];
    const std::size_t base = pidx * G;
    if (z[i]) {
      if (z[j])
        tables.j11[base + std::min(cut1[i], cut1[j])] += w;
      else
        tables.j10[base + std::min(cut1[i], cut0[j])] += w;
    } else {
      if (z[j])
        tables.j01[base + std::min(cut0[i], cut1[j])] += w;
      else
        tables.j00[base + std::min(cut0[i], cut0[j])] += w;
    }
  }
}

void suffix_sums_to_probabilities(const std::vector<std::uint32_t>& counts,
                                  double denom, std::size_t G,
                                  std::vector<double>& out) {
  out.assign(counts.size(), 0.0);
  for (std::size_t row = 0; row * G < counts.size(); ++row) {
    std::uint64_t acc = 0;
    for (std::size_t k = G; k-- > 0;) {
      acc += counts[row * G + k];
      out[row * G + k] = static_cast<double>(acc) / denom;
    }
  }
}

void suffix_sums_in_place(std::vector<double>& table, std::size_t G) {
  for (std::size_t row = 0; row * G < table.size(); ++row) {
    double acc = 0.0;
    for (std::size_t k = G; k-- > 0;) {
      acc += table[row * G + k];
      table[row * G + k] = acc;
    }
  }
}

}  // namespace

ExposureProbabilities mc_probabilities(const Graph& g, const Design& design,
                                       const ThresholdGrid& grid,
                                       std::int64_t draws, std::uint64_t seed,
                                       int threads, bool with_joints) {
  if (draws < 1) throw config_error("mc_probabilities requires draws >= 1");
  if (draws > std::numeric_limits<std::uint32_t>::max())
    throw config_error("mc_probabilities supports at most 2^32-1 draws");
  design.validate(g);
  const std::size_t G = grid.size();
  const std::vector<std::pair<std::int32_t, std::int32_t>> pairs =
      with_joints ? dependent_pairs(g, design)
                  : std::vector<std::pair<std::int32_t, std::int32_t>>{};
  const CutTable cuts(grid, g.d_max());

  const int workers = detail::resolve_threads(threads);
  std::vector<std::unique_ptr<CountTables>> per_worker;
  per_worker.reserve(workers);
  for (int w = 0; w < workers; ++w)
    per_worker.push_back(
        std::make_unique<CountTables>(g.n(), pairs.size(), G));

  detail::parallel_chunks(draws, workers, [&](int w, std::int64_t begin,
                                              std::int64_t end) {
    std::vector<std::int32_t> cut1(g.n()), cut0(g.n());
    for (std::int64_t r = begin; r < end; ++r) {
      const Assignment a = sample_assignment(design, g, seed, r);
      accumulate_assignment(g, a.z, pairs, cuts, G, std::uint32_t{1},
                            *per_worker[w], cut1, cut0);
    }
  });

  // integer merge: identical for any worker count
  CountTables total(g.n(), pairs.size(), G);
  const auto merge = [](std::vector<std::uint32_t>& into,
                        const std::vector<std::uint32_t>& from) {
    for (std::size_t x = 0; x < into.size(); ++x) into[x] += from[x];
  };
  for (const auto& t : per_worker) {
    merge(total.m1, t->m1);
    merge(total.m0, t->m0);
    merge(total.j11, t->j11);
    merge(total.j00, t->j00);
    merge(total.j10, t->j10);
    merge(total.j01, t->j01);
  }

  ExposureProbabilities probs;
  probs.grid = grid;
  probs.n = g.n();
  probs.pairs = pairs;
  probs.joints_computed = with_joints;
  probs.draws = draws;
  probs.seed = seed;
  probs.source = ProbSource::monte_carlo;
  const auto R = static_cast<double>(draws);
  suffix_sums_to_probabilities(total.m1, R, G, probs.marginal1);
  suffix_sums_to_probabilities(total.m0, R, G, probs.marginal0);
  suffix_sums_to_probabilities(total.j11, R, G, probs.joint11);
  suffix_sums_to_probabilities(total.j00, R, G, probs.joint00);
  suffix_sums_to_probabilities(total.j10, R, G, probs.joint10);
  suffix_sums_to_probabilities(total.j01, R, G, probs.joint01);
  return probs;
}

ExposureProbabilities enumeration_probabilities(const Graph& g,
                                                const Design& design,
                                                const ThresholdGrid& grid,
                                                std::uint64_t cap) {
  const std::size_t G = grid.size();
  const auto pairs = dependent_pairs(g, design);
  const CutTable cuts(grid, g.d_max());

  struct WeightTables {
    std::vector<double> m1, m0, j11, j00, j10, j01;
  } t;
  t.m1.assign(static_cast<std::size_t>(g.n()) * G, 0.0);
  t.m0.assign(static_cast<std::size_t>(g.n()) * G, 0.0);
  t.j11.assign(pairs.size() * G, 0.0);
  t.j00.assign(pairs.size() * G, 0.0);
  t.j10.assign(pairs.size() * G, 0.0);
  t.j01.assign(pairs.size() * G, 0.0);

  std::vector<std::int32_t> cut1(g.n()), cut0(g.n());
  enumerate_assignments(
      design, g,
      [&](const std::vector<std::uint8_t>& z, double pr) {
        accumulate_assignment(g, z, pairs, cuts, G, pr, t, cut1, cut0);
      },
      cap);

  suffix_sums_in_place(t.m1, G);
  suffix_sums_in_place(t.m0, G);
  suffix_sums_in_place(t.j11, G);
  suffix_sums_in_place(t.j00, G);
  suffix_sums_in_place(t.j10, G);
  suffix_sums_in_place(t.j01, G);

  ExposureProbabilities probs;
  probs.grid = grid;
  probs.n = g.n();
  probs.pairs = pairs;
  probs.joints_computed = true;
  probs.draws = 0;
  probs.source = ProbSource::enumeration;
  probs.marginal1 = std::move(t.m1);
  probs.marginal0 = std::move(t.m0);
  probs.joint11 = std::move(t.j11);
  probs.joint00 = std::move(t.j00);
  probs.joint10 = std::move(t.j10);
  probs.joint01 = std::move(t.j01);
  return probs;
}

ExposureProbabilities with_exact_marginals(ExposureProbabilities probs,
                                           const Graph& g, double p) {
  ExposureProbabilities exact = exact_unit_marginals(g, p, probs.grid);
  probs.marginal1 = std::move(exact.marginal1);
  probs.marginal0 = std::move(exact.marginal0);
  return probs;
}

namespace {

constexpr std::uint64_t kCacheMagic = 0x41445448'50524231ULL;  // "ADTHPRB1"

nlohmann::json key_json(const ProbCacheKey& key) {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& h : key.grid.points) grid.push_back({h.num, h.den});
  return nlohmann::json{{"graph_hash", key.graph_hash},
                        {"design", key.design},
                        {"grid", grid},
                        {"draws", key.draws},
                        {"seed", key.seed}};
}

template <typename T>
void write_raw(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
bool read_raw(std::istream& in, std::vector<T>& v, std::size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  return static_cast<bool>(in);
}

}  // namespace

void save_probabilities(const ExposureProbabilities& probs,
                        const ProbCacheKey& key, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write probability cache: " + path);
  nlohmann::json header = key_json(key);
  header["n"] = probs.n;
  header["grid_size"] = probs.grid.size();
  header["npairs"] = probs.pairs.size();
  header["joints_computed"] = probs.joints_computed;
  header["source"] = to_string(probs.source);
  const std::string htext = header.dump();
  const std::uint64_t magic = kCacheMagic;
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&magic), sizeof(magic));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  write_raw(out, probs.marginal1);
  write_raw(out, probs.marginal0);
  std::vector<std::int32_t> flat;
  flat.reserve(probs.pairs.size() * 2);
  for (const auto& [i, j] : probs.pairs) {
    flat.push_back(i);
    flat.push_back(j);
  }
  write_raw(out, flat);
  write_raw(out, probs.joint11);
  write_raw(out, probs.joint00);
  write_raw(out, probs.joint10);
  write_raw(out, probs.joint01);
  if (!out) throw config_error("failed writing probability cache: " + path);
}

std::optional<ExposureProbabilities> load_probabilities(
    const ProbCacheKey& key, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::uint64_t magic = 0, hlen = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || magic != kCacheMagic || hlen > (1ull << 30)) return std::nullopt;
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) return std::nullopt;
  nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
  if (header.is_discarded()) return std::nullopt;

  nlohmann::json expected = key_json(key);
  for (const auto& [field, value] : expected.items())
    if (!header.contains(field) || header[field] != value) return std::nullopt;

  ExposureProbabilities probs;
  probs.grid = key.grid;
  probs.n = header["n"].get<std::int32_t>();
  probs.joints_computed = header.value("joints_computed", false);
  probs.draws = key.draws;
  probs.seed = key.seed;
  const std::string source = header["source"].get<std::string>();
  probs.source = source == "enumeration"      ? ProbSource::enumeration
                 : source == "monte-carlo"    ? ProbSource::monte_carlo
                                              : ProbSource::exact_marginals;
  const std::size_t G = header["grid_size"].get<std::size_t>();
  if (G != key.grid.size()) return std::nullopt;
  const std::size_t npairs = header["npairs"].get<std::size_t>();
  const std::size_t cells = static_cast<std::size_t>(probs.n) * G;
  std::vector<std::int32_t> flat;
  if (!read_raw(in, probs.marginal1, cells)) return std::nullopt;
  if (!read_raw(in, probs.marginal0, cells)) return std::nullopt;
  if (!read_raw(in, flat, npairs * 2)) return std::nullopt;
  probs.pairs.reserve(npairs);
  for (std::size_t x = 0; x < npairs; ++x)
    probs.pairs.emplace_back(flat[2 * x], flat[2 * x + 1]);
  if (!read_raw(in, probs.joint11, npairs * G)) return std::nullopt;
  if (!read_raw(in, probs.joint00, npairs * G)) return std::nullopt;
  if (!read_raw(in, probs.joint10, npairs * G)) return std::nullopt;
  if (!read_raw(in, probs.joint01, npairs * G)) return std::nullopt;
  return probs;
}

}  // namespace adathresh
