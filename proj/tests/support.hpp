#pragma once

// Small fixtures shared by the unit tests.

#include "dalvq/geometry.hpp"
#include "dalvq/measures.hpp"

#include <random>
#include <vector>

namespace dalvq::test {

inline DistributionSpec unit_box(std::size_t dim = 2) {
  DistributionSpec d;
  d.dim = dim;
  d.lower.assign(dim, 0.0);
  d.upper.assign(dim, 1.0);
  return d;
}

inline QuantizerVec random_quantizer(std::mt19937_64& rng, std::size_t kappa, std::size_t dim, double lo = 0.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> c(kappa * dim);
  for (auto& x : c) x = u(rng);
  return QuantizerVec(kappa, dim, c);
}

inline double max_abs_diff(const QuantizerVec& a, const QuantizerVec& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.coords().size(); ++k) m = std::max(m, std::abs(a.coords()[k] - b.coords()[k]));
  return m;
}

} // namespace dalvq::test
