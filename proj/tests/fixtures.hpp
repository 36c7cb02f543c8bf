#pragma once

// Random small laws shared by the unit and acceptance tests.

#include <random>
#include <vector>

#include "driftbench/distribution.hpp"
#include "driftbench/random.hpp"

namespace driftbench::fixture {

/// Weights drawn from U(0.05, 1) and normalized, the last one absorbing rounding.
inline std::vector<double> random_weights(Rng& rng, std::size_t k) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& v : w) {
    v = unit(rng);
    total += v;
  }
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    w[i] /= total;
    partial += w[i];
  }
  w.back() = 1.0 - partial;
  return w;
}

/// k atoms with N(0, 1) coordinates in the given dimension and random weights.
inline DiscreteDistribution random_law(Rng& rng, std::size_t k, std::size_t dim) {
  std::vector<Vector> atoms;
  for (std::size_t i = 0; i < k; ++i) atoms.push_back(gaussian_vector(rng, dim));
  return {std::move(atoms), random_weights(rng, k)};
}

}  // namespace driftbench::fixture
