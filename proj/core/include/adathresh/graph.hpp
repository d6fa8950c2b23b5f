#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adathresh {

// Immutable undirected interference graph in compressed adjacency form.
// Node ids are dense 0-based integers; external ids are mapped at ingestion.
class Graph {
 public:
  Graph() = default;

  // Builds from an edge list. Parallel edges collapse silently; self-loops
  // are dropped and counted (the exposure fraction is defined over distinct
  // neighbors excluding the node itself).
  Graph(std::int32_t n, std::span<const std::pair<std::int32_t, std::int32_t>> edges);

  std::int32_t n() const { return n_; }
  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(neighbors_.size()) / 2;
  }
  std::int32_t degree(std::int32_t i) const {
    return offsets_[i + 1] - offsets_[i];
  }
  std::int32_t d_max() const { return d_max_; }
  std::span<const std::int32_t> neighbors(std::int32_t i) const {
    return {neighbors_.data() + offsets_[i],
            static_cast<std::size_t>(degree(i))};
  }
  bool adjacent(std::int32_t i, std::int32_t j) const;
  bool regular() const;
  std::int64_t dropped_self_loops() const { return dropped_self_loops_; }

  // Nodes within graph distance <= r of i, excluding i, ascending.
  std::vector<std::int32_t> ball(std::int32_t i, int radius) const;

  // Content hash over (n, adjacency); used as a cache key component.
  std::uint64_t hash() const;

 private:
  std::int32_t n_ = 0;
  std::int32_t d_max_ = 0;
  std::int64_t dropped_self_loops_ = 0;
  std::vector<std::int32_t> offsets_{0};
  std::vector<std::int32_t> neighbors_;
};

// Circulant graph joining node i with (i +- r) mod n for r = 1..k.
// Requires n >= 2k+1 so the 2k neighbor offsets are distinct.
Graph kth_power_cycle(std::int32_t n, int k);

// Stochastic block model: each intra-block pair edged with p_in, inter-block
// with p_out, iterating ordered pairs i<j from a counter-based stream so the
// result is reproducible for a fixed seed under any parallel schedule.
Graph sbm(std::span<const std::int32_t> block_sizes, double p_in, double p_out,
          std::uint64_t seed);

struct EdgeListResult {
  Graph graph;
  std::vector<std::int64_t> external_ids;  // dense id -> original id
  std::int64_t dropped_self_loops = 0;
};

// Reads whitespace-separated integer pairs, '#'-prefixed comment lines
// allowed. Directed duplicates and reversed pairs merge into one undirected
// edge; ids compact to 0..n-1 by first appearance.
EdgeListResult read_edge_list(std::istream& in);
EdgeListResult read_edge_list_file(const std::string& path);

// Writes "u<TAB>v" lines with u < v, ascending.
void write_edge_list(const Graph& g, std::ostream& out);

// Ids with degree >= 1, ascending.
std::vector<std::int32_t> non_isolated_subset(const Graph& g);

// Partition of the nodes into clusters with dense ids 0..K-1.
// s_max is 1 + the maximum number of inter-cluster edges incident to any
// single cluster.
struct Clustering {
  std::vector<std::int32_t> cluster_of;
  std::vector<std::vector<std::int32_t>> clusters;
  std::int32_t s_max = 1;

  std::int32_t cluster_count() const {
    return static_cast<std::int32_t>(clusters.size());
  }

  // Validates the partition and computes s_max against the graph.
  static Clustering from_assignments(std::vector<std::int32_t> cluster_of,
                                     const Graph& g);
  std::uint64_t hash() const;
};

// Cluster j = nodes [j*size, (j+1)*size); size must divide n.
Clustering contiguous_clusters(const Graph& g, std::int32_t size);

// One "node_id cluster_id" pair per line covering every node exactly once.
Clustering load_clusters(std::istream& in, const Graph& g);
Clustering load_clusters_file(const std::string& path, const Graph& g);

}  // namespace adathresh
