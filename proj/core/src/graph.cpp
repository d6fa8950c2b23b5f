#include "adathresh/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "adathresh/errors.hpp"
#include "adathresh/rng.hpp"

namespace adathresh {

Graph::Graph(std::int32_t n,
             std::span<const std::pair<std::int32_t, std::int32_t>> edges)
    : n_(n) {
  if (n < 0) throw config_error("node count must be non-negative");
  std::vector<std::vector<std::int32_t>> adj(n);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw config_error("edge endpoint out of range");
    if (u == v) {
      ++dropped_self_loops_;
      continue;
    }
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  offsets_.resize(n + 1, 0);
  for (std::int32_t i = 0; i < n; ++i) {
    auto& nb = adj[i];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    offsets_[i + 1] = offsets_[i] + static_cast<std::int32_t>(nb.size());
  }
  neighbors_.reserve(offsets_[n]);
  for (std::int32_t i = 0; i < n; ++i)
    neighbors_.insert(neighbors_.end(), adj[i].begin(), adj[i].end());
  for (std::int32_t i = 0; i < n; ++i) d_max_ = std::max(d_max_, degree(i));
}

bool Graph::adjacent(std::int32_t i, std::int32_t j) const {
  const auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool Graph::regular() const {
  if (n_ == 0) return true;
  for (std::int32_t i = 1; i < n_; ++i)
    if (degree(i) != degree(0)) return false;
  return true;
}

std::vector<std::int32_t> Graph::ball(std::int32_t i, int radius) const {
  std::vector<std::int32_t> dist(n_, -1);
  std::deque<std::int32_t> queue{i};
  dist[i] = 0;
  std::vector<std::int32_t> out;
  while (!queue.empty()) {
    const std::int32_t u = queue.front();
    queue.pop_front();
    if (dist[u] == radius) continue;
    for (const std::int32_t w : neighbors(u)) {
      if (dist[w] != -1) continue;
      dist[w] = dist[u] + 1;
      out.push_back(w);
      queue.push_back(w);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t x) {
  for (int b = 0; b < 8; ++b) {
    h ^= (x >> (8 * b)) & 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Graph::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  h = fnv1a(h, static_cast<std::uint64_t>(n_));
  for (const std::int32_t o : offsets_) h = fnv1a(h, static_cast<std::uint64_t>(o));
  for (const std::int32_t v : neighbors_) h = fnv1a(h, static_cast<std::uint64_t>(v));
  return h;
}

Graph kth_power_cycle(std::int32_t n, int k) {
  if (k < 1) throw config_error("cycle power k must be >= 1");
  if (n <= 2 * k)
    throw config_error("kth power cycle needs n >= 2k+1, got n=" +
                       std::to_string(n) + ", k=" + std::to_string(k));
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  edges.reserve(static_cast<std::size_t>(n) * k);
  for (std::int32_t i = 0; i < n; ++i)
    for (int r = 1; r <= k; ++r)
      edges.emplace_back(i, static_cast<std::int32_t>((i + r) % n));
  return Graph(n, edges);
}

Graph sbm(std::span<const std::int32_t> block_sizes, double p_in, double p_out,
          std::uint64_t seed) {
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0))
    throw config_error("sbm requires 0 <= p_out <= p_in <= 1");
  std::int64_t n = 0;
  for (const std::int32_t s : block_sizes) {
    if (s < 0) throw config_error("negative block size");
    n += s;
  }
  std::vector<std::int32_t> block;
  block.reserve(n);
  for (std::size_t b = 0; b < block_sizes.size(); ++b)
    block.insert(block.end(), block_sizes[b], static_cast<std::int32_t>(b));

  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  const std::uint64_t s = purpose_seed(seed, rng_purpose::kSbmEdges);
  std::uint64_t rank = 0;  // ordered-pair counter, fixed iteration order
  for (std::int32_t i = 0; i < n; ++i) {
    for (std::int32_t j = i + 1; j < n; ++j, ++rank) {
      const double p = block[i] == block[j] ? p_in : p_out;
      if (p <= 0.0) continue;
      if (p >= 1.0 || uniform01(s, /*stream=*/0, rank) < p)
        edges.emplace_back(i, j);
    }
  }
  return Graph(static_cast<std::int32_t>(n), edges);
}

EdgeListResult read_edge_list(std::istream& in) {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  std::vector<std::int64_t> external;
  std::unordered_map<std::int64_t, std::int32_t> id_of;
  std::int64_t dropped = 0;
  std::string line;
  std::size_t lineno = 0;

  const auto intern = [&](std::int64_t ext) {
    const auto [it, inserted] =
        id_of.try_emplace(ext, static_cast<std::int32_t>(external.size()));
    if (inserted) external.push_back(ext);
    return it->second;
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    std::istringstream fields(line);
    std::int64_t u, v;
    if (!(fields >> u >> v))
      throw parse_error(lineno, "expected two integer node ids, got '" + line + "'");
    std::string extra;
    if (fields >> extra)
      throw parse_error(lineno, "trailing token '" + extra + "'");
    if (u == v) {
      ++dropped;
      intern(u);
      continue;
    }
    // interning order defines the id compaction; keep it left to right
    const std::int32_t a = intern(u);
    const std::int32_t b = intern(v);
    edges.emplace_back(a, b);
  }

  EdgeListResult result;
  result.graph = Graph(static_cast<std::int32_t>(external.size()), edges);
  result.external_ids = std::move(external);
  result.dropped_self_loops = dropped;
  return result;
}

EdgeListResult read_edge_list_file(const std::string& path) {
  if (path == "-") return read_edge_list(std::cin);
  std::ifstream in(path);
  if (!in) throw config_error("cannot open edge list file: " + path);
  return read_edge_list(in);
}

void write_edge_list(const Graph& g, std::ostream& out) {
  for (std::int32_t i = 0; i < g.n(); ++i)
    for (const std::int32_t j : g.neighbors(i))
      if (i < j) out << i << '\t' << j << '\n';
}

std::vector<std::int32_t> non_isolated_subset(const Graph& g) {
  std::vector<std::int32_t> out;
  for (std::int32_t i = 0; i < g.n(); ++i)
    if (g.degree(i) >= 1) out.push_back(i);
  return out;
}

namespace {

std::int32_t boundary_s_max(const Graph& g,
                            const std::vector<std::int32_t>& cluster_of,
                            std::int32_t cluster_count) {
  // Per cluster: edges with exactly one endpoint inside, max over clusters,
  // plus one.
  std::vector<std::int64_t> boundary(cluster_count, 0);
  for (std::int32_t i = 0; i < g.n(); ++i) {
    for (const std::int32_t j : g.neighbors(i)) {
      if (i < j && cluster_of[i] != cluster_of[j]) {
        ++boundary[cluster_of[i]];
        ++boundary[cluster_of[j]];
      }
    }
  }
  std::int64_t worst = 0;
  for (const std::int64_t b : boundary) worst = std::max(worst, b);
  return static_cast<std::int32_t>(worst + 1);
}

}  // namespace

Clustering Clustering::from_assignments(std::vector<std::int32_t> cluster_of,
                                        const Graph& g) {
  if (static_cast<std::int32_t>(cluster_of.size()) != g.n())
    throw config_error("cluster assignment does not cover every node");
  std::int32_t k = 0;
  for (const std::int32_t c : cluster_of) {
    if (c < 0) throw config_error("negative cluster id");
    k = std::max(k, c + 1);
  }
  Clustering result;
  result.clusters.resize(k);
  for (std::int32_t i = 0; i < g.n(); ++i)
    result.clusters[cluster_of[i]].push_back(i);
  for (const auto& members : result.clusters)
    if (members.empty())
      throw config_error("cluster ids must be dense 0..K-1");
  result.cluster_of = std::move(cluster_of);
  result.s_max = boundary_s_max(g, result.cluster_of, k);
  return result;
}

std::uint64_t Clustering::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const std::int32_t c : cluster_of)
    h = fnv1a(h, static_cast<std::uint64_t>(c));
  return h;
}

Clustering contiguous_clusters(const Graph& g, std::int32_t size) {
  if (size <= 0) throw config_error("cluster size must be positive");
  if (g.n() % size != 0)
    throw config_error("cluster size " + std::to_string(size) +
                       " does not divide n=" + std::to_string(g.n()));
  std::vector<std::int32_t> cluster_of(g.n());
  for (std::int32_t i = 0; i < g.n(); ++i) cluster_of[i] = i / size;
  return Clustering::from_assignments(std::move(cluster_of), g);
}

Clustering load_clusters(std::istream& in, const Graph& g) {
  std::vector<std::int32_t> raw(g.n(), -1);
  std::vector<std::int64_t> raw_ids;
  std::unordered_map<std::int64_t, std::int32_t> compact;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    std::istringstream fields(line);
    std::int64_t node, cluster;
    if (!(fields >> node >> cluster))
      throw parse_error(lineno, "expected 'node cluster', got '" + line + "'");
    if (node < 0 || node >= g.n())
      throw parse_error(lineno, "unknown node id " + std::to_string(node));
    if (raw[node] != -1)
      throw parse_error(lineno, "duplicate node id " + std::to_string(node));
    const auto [it, inserted] = compact.try_emplace(
        cluster, static_cast<std::int32_t>(raw_ids.size()));
    if (inserted) raw_ids.push_back(cluster);
    raw[node] = it->second;
  }
  for (std::int32_t i = 0; i < g.n(); ++i)
    if (raw[i] == -1)
      throw config_error("cluster file missing node " + std::to_string(i));
  return Clustering::from_assignments(std::move(raw), g);
}

Clustering load_clusters_file(const std::string& path, const Graph& g) {
  if (path == "-") return load_clusters(std::cin, g);
  std::ifstream in(path);
  if (!in) throw config_error("cannot open cluster file: " + path);
  return load_clusters(in, g);
}

}  // namespace adathresh
