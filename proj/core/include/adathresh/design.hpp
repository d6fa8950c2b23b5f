#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "adathresh/graph.hpp"

namespace adathresh {

enum class DesignKind { unit_bernoulli, cluster_bernoulli };

// Randomization design. Positivity requires 0 < p < 1; a cluster design
// carries the clustering it randomizes over.
struct Design {
  DesignKind kind = DesignKind::unit_bernoulli;
  double p = 0.5;
  std::shared_ptr<const Clustering> clustering;  // cluster kind only

  static Design unit_bernoulli(double p);
  static Design cluster_bernoulli(double p,
                                  std::shared_ptr<const Clustering> clustering);

  // Number of independent coins: n for unit designs, K for cluster designs.
  std::int32_t coin_count(const Graph& g) const;
  void validate(const Graph& g) const;
  std::string describe() const;  // stable string, used in cache keys
};

// One realized treatment vector along with its provenance.
struct Assignment {
  std::vector<std::uint8_t> z;
  std::uint64_t seed = 0;
  std::int64_t replicate = 0;
};

// Pure in (design, g, seed, replicate): coin c draws from the counter-based
// stream keyed (seed, replicate, c), so replicates may be sampled in any
// order or concurrently with identical results.
Assignment sample_assignment(const Design& design, const Graph& g,
                             std::uint64_t seed, std::int64_t replicate);

// Visits every assignment with its exact probability p^t (1-p)^(m-t) over
// the m coins. Throws enumeration_cap_error when 2^m exceeds cap.
inline constexpr std::uint64_t kDefaultEnumerationCap = 1ull << 22;

void enumerate_assignments(
    const Design& design, const Graph& g,
    const std::function<void(const std::vector<std::uint8_t>&, double)>& fn,
    std::uint64_t cap = kDefaultEnumerationCap);

// Range variant for deterministic parallel partitions over assignment
// indices [begin, end) with end <= 2^coin_count.
void enumerate_assignment_range(
    const Design& design, const Graph& g, std::uint64_t begin,
    std::uint64_t end,
    const std::function<void(const std::vector<std::uint8_t>&, double)>& fn);

std::uint64_t assignment_space_size(const Design& design, const Graph& g,
                                    std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace adathresh
