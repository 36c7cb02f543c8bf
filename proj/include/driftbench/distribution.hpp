#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "driftbench/core.hpp"

namespace driftbench {

/// Finitely supported probability measure on R^k.
///
/// Regression data w = (u, d) is stored as an atom of length n + 1 whose last
/// coordinate is the output d; see `regression_input` / `regression_output`.
class DiscreteDistribution {
 public:
  static constexpr double kWeightTolerance = 1e-12;

  DiscreteDistribution() = default;

  DiscreteDistribution(std::vector<Vector> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    detail::require(!atoms_.empty(), "DiscreteDistribution: empty support");
    detail::require(atoms_.size() == weights_.size(),
                    "DiscreteDistribution: atom/weight count mismatch");
    const std::size_t dim = atoms_.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      detail::require(atoms_[i].size() == dim, "DiscreteDistribution: ragged atoms");
      detail::require(std::isfinite(weights_[i]) && weights_[i] >= 0.0,
                      "DiscreteDistribution: negative weight");
      total += weights_[i];
    }
    detail::require(std::abs(total - 1.0) <= kWeightTolerance,
                    "DiscreteDistribution: weights must sum to 1");
  }

  static DiscreteDistribution uniform(std::vector<Vector> atoms) {
    const std::size_t k = atoms.size();
    detail::require(k > 0, "DiscreteDistribution::uniform: empty support");
    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    // 1/k may not sum to exactly 1; put the rounding residue on the last atom.
    const double total = std::accumulate(w.begin(), w.end() - 1, 0.0);
    w.back() = 1.0 - total;
    return {std::move(atoms), std::move(w)};
  }

  static DiscreteDistribution point_mass(Vector atom) {
    return {std::vector<Vector>{std::move(atom)}, std::vector<double>{1.0}};
  }

  /// Scalar-valued law with the given values and weights.
  static DiscreteDistribution on_line(const std::vector<double>& values,
                                      std::vector<double> weights) {
    std::vector<Vector> atoms;
    atoms.reserve(values.size());
    for (double v : values) atoms.push_back(Vector{v});
    return {std::move(atoms), std::move(weights)};
  }

  static DiscreteDistribution uniform_on_line(const std::vector<double>& values) {
    std::vector<Vector> atoms;
    atoms.reserve(values.size());
    for (double v : values) atoms.push_back(Vector{v});
    return uniform(std::move(atoms));
  }

  std::size_t size() const { return atoms_.size(); }
  std::size_t dimension() const { return atoms_.empty() ? 0 : atoms_.front().size(); }
  const std::vector<Vector>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  const Vector& atom(std::size_t i) const { return atoms_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  template <class F>
  double expectation(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) s += weights_[i] * f(atoms_[i]);
    return s;
  }

  /// Mean of a scalar law (dimension 1).
  double mean() const {
    detail::require(dimension() == 1, "DiscreteDistribution::mean: scalar law expected");
    return expectation([](const Vector& a) { return a[0]; });
  }

 private:
  std::vector<Vector> atoms_;
  std::vector<double> weights_;
};

inline std::span<const double> regression_input(const Vector& atom) {
  return std::span<const double>(atom.data(), atom.size() - 1);
}

inline double regression_output(const Vector& atom) { return atom.back(); }

inline Vector regression_atom(std::span<const double> u, double d) {
  Vector w(u.begin(), u.end());
  w.push_back(d);
  return w;
}

/// Combines equal atoms and drops zero weights.
inline DiscreteDistribution canonicalize(const DiscreteDistribution& p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p.atom(a) < p.atom(b); });
  std::vector<Vector> atoms;
  std::vector<double> weights;
  for (std::size_t idx : order) {
    if (!atoms.empty() && atoms.back() == p.atom(idx)) {
      weights.back() += p.weight(idx);
    } else {
      atoms.push_back(p.atom(idx));
      weights.push_back(p.weight(idx));
    }
  }
  std::vector<Vector> kept_atoms;
  std::vector<double> kept_weights;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (weights[i] > 0.0) {
      kept_atoms.push_back(std::move(atoms[i]));
      kept_weights.push_back(weights[i]);
    }
  }
  return {std::move(kept_atoms), std::move(kept_weights)};
}

}  // namespace driftbench
