#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipgla {

using Vec = std::vector<double>;
using ConstView = std::span<const double>;
using MutView = std::span<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when a point lies outside the domain of a potential.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative method cannot deliver its contract
/// (step-size underflow, repeated prox failures, non-finite iterates).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline double dot(ConstView a, ConstView b) {
  require(a.size() == b.size(), "dot: size mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(ConstView a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(ConstView a, ConstView b) {
  require(a.size() == b.size(), "squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline bool all_finite(ConstView a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ipgla
