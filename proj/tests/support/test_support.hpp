#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "topoctl/three_field.hpp"

namespace topoctl::testing {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = 0.05,
                                         double hi = 0.95) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline DensityField random_field(const Mesh& mesh, std::uint64_t seed, double lo = 0.05,
                                 double hi = 0.95) {
  return DensityField(mesh, random_values(mesh.element_count(), seed, lo, hi));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace topoctl::testing
