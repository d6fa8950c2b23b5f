#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adathresh {

// Configuration / usage problems: bad parameters, malformed files, unknown
// options. CLI exit code 1.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Data or infeasibility problems discovered during computation. CLI exit
// code 2.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A required exposure probability is zero for some unit at some threshold.
class positivity_error : public data_error {
 public:
  positivity_error(int unit, const std::string& threshold)
      : data_error("zero exposure probability for unit " +
                   std::to_string(unit) + " at h=" + threshold),
        unit(unit) {}
  int unit;
};

// An exposure arm contains no units (difference-in-means family).
class empty_arm_error : public data_error {
 public:
  empty_arm_error(const std::string& arm, const std::string& threshold)
      : data_error("empty " + arm + " arm at h=" + threshold) {}
};

// A joint probability was estimated as zero although the corresponding
// indicator product was observed; the Monte Carlo table has too few draws.
class inconsistency_error : public data_error {
 public:
  inconsistency_error(int i, int j, const std::string& threshold)
      : data_error("joint probability for pair (" + std::to_string(i) + "," +
                   std::to_string(j) + ") estimated zero at h=" + threshold +
                   " but the indicator product is nonzero; "
                   "increase the number of Monte Carlo draws") {}
};

// Exact enumeration would exceed the configured assignment cap.
class enumeration_cap_error : public data_error {
 public:
  enumeration_cap_error(int coins, std::uint64_t cap)
      : data_error("exact enumeration over " + std::to_string(coins) +
                   " coins exceeds the cap of " + std::to_string(cap) +
                   " assignments; use the Monte Carlo oracle instead") {}
};

// Malformed input line in an edge-list or cluster file.
class parse_error : public config_error {
 public:
  parse_error(std::size_t line, const std::string& msg)
      : config_error("line " + std::to_string(line) + ": " + msg) {}
};

}  // namespace adathresh
