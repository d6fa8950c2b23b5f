#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "adathresh/errors.hpp"

namespace adathresh {

// Exact rational in [0,1], used for exposure thresholds. Grid points such as
// 1/3 are not representable in binary floating point and estimator indicator
// events sit exactly on grid boundaries, so all threshold comparisons are
// done in integer arithmetic.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den <= 0 || num < 0)
      throw config_error("rational threshold must be non-negative with a "
                         "positive denominator");
    const std::int64_t g = std::gcd(num, den);
    num /= g;
    den /= g;
  }

  double value() const { return static_cast<double>(num) / den; }
  std::string str() const {
    return den == 1 ? std::to_string(num)
                    : std::to_string(num) + "/" + std::to_string(den);
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den <
           static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) {
    return !(b < a);
  }
};

// Treatment exposure: e = t/d >= h, evaluated as t*h.den >= h.num*d.
inline bool exposure_at_least(std::int64_t treated, std::int64_t degree,
                              const Rational& h) {
  return static_cast<__int128>(treated) * h.den >=
         static_cast<__int128>(h.num) * degree;
}

// Control exposure: e = t/d <= 1-h, evaluated as t*h.den <= (h.den-h.num)*d.
inline bool exposure_at_most_complement(std::int64_t treated,
                                        std::int64_t degree,
                                        const Rational& h) {
  return static_cast<__int128>(treated) * h.den <=
         static_cast<__int128>(h.den - h.num) * degree;
}

// e = t/d <= bound.
inline bool exposure_at_most(std::int64_t treated, std::int64_t degree,
                             const Rational& bound) {
  return static_cast<__int128>(treated) * bound.den <=
         static_cast<__int128>(bound.num) * degree;
}

inline Rational one_minus(const Rational& h) {
  return Rational(h.den - h.num, h.den);
}

// Ordered set of candidate thresholds; must be strictly increasing and span
// [0,1] inclusive.
struct ThresholdGrid {
  std::vector<Rational> points;

  ThresholdGrid() = default;
  explicit ThresholdGrid(std::vector<Rational> pts) : points(std::move(pts)) {
    validate();
  }

  // {u/den : u = 0..den}
  static ThresholdGrid uniform(int den) {
    if (den < 1) throw config_error("grid denominator must be >= 1");
    std::vector<Rational> pts;
    pts.reserve(den + 1);
    for (int u = 0; u <= den; ++u) pts.emplace_back(u, den);
    return ThresholdGrid(std::move(pts));
  }

  std::size_t size() const { return points.size(); }
  const Rational& operator[](std::size_t k) const { return points[k]; }

  // Index of an exact grid point, or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(const Rational& h) const {
    for (std::size_t k = 0; k < points.size(); ++k)
      if (points[k] == h) return k;
    return npos;
  }

  friend bool operator==(const ThresholdGrid& a, const ThresholdGrid& b) {
    return a.points == b.points;
  }

 private:
  void validate() const {
    if (points.empty()) throw config_error("threshold grid is empty");
    if (!(points.front() == Rational(0, 1)) ||
        !(points.back() == Rational(1, 1)))
      throw config_error("threshold grid must contain 0 and 1");
    for (std::size_t k = 1; k < points.size(); ++k)
      if (!(points[k - 1] < points[k]))
        throw config_error("threshold grid must be strictly increasing");
  }
};

}  // namespace adathresh
