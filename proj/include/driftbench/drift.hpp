#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "driftbench/core.hpp"
#include "driftbench/distribution.hpp"
#include "driftbench/random.hpp"

namespace driftbench {

/// Axis-aligned box [lower, upper].
struct BoxSet {
  Vector lower;
  Vector upper;

  static BoxSet uniform(std::size_t n, double lo, double hi) {
    return {Vector(n, lo), Vector(n, hi)};
  }

  void validate() const {
    detail::require(lower.size() == upper.size(), "BoxSet: bound size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      detail::require(lower[i] <= upper[i], "BoxSet: lower > upper");
    }
  }

  bool contains(std::span<const double> x) const {
    detail::require_same_size(x.size(), lower.size(), "BoxSet::contains");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    }
    return true;
  }

  void project_in_place(std::span<double> x) const {
    detail::require_same_size(x.size(), lower.size(), "BoxSet::project");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  }
};

enum class DriftDecay { kInverseTime, kConstant };

struct DriftingScene {
  std::size_t dimension = 5;
  Vector initial_theta = Vector(5, 1.0);
  double drift_scale = 1e-4;
  DriftDecay drift_decay = DriftDecay::kInverseTime;
  std::optional<BoxSet> projection_set;  // nullopt: unbounded
  double noise_variance = 0.5;
  std::size_t horizon = 500;

  void validate() const {
    detail::require(dimension >= 1, "DriftingScene: dimension must be >= 1");
    detail::require(initial_theta.size() == dimension, "DriftingScene: initial_theta size");
    detail::require(drift_scale >= 0.0, "DriftingScene: drift_scale must be >= 0");
    detail::require(noise_variance >= 0.0, "DriftingScene: noise_variance must be >= 0");
    detail::require(horizon >= 1, "DriftingScene: horizon must be >= 1");
    if (projection_set) {
      projection_set->validate();
      detail::require(projection_set->lower.size() == dimension,
                      "DriftingScene: projection set dimension");
    }
  }

  double drift_variance(std::size_t t) const {
    return drift_decay == DriftDecay::kInverseTime ? drift_scale / static_cast<double>(t)
                                                   : drift_scale;
  }
};

/// m regression samples drawn at round t.
struct SampleBatch {
  std::vector<Vector> inputs;
  std::vector<double> outputs;
  std::size_t t = 1;

  std::size_t size() const { return outputs.size(); }
};

struct GroundTruthPath {
  std::vector<Vector> thetas;  // thetas[t - 1] is the parameter at round t
  const Vector& at(std::size_t t) const { return thetas.at(t - 1); }
  std::size_t horizon() const { return thetas.size(); }
};

/// proj_C(theta + z), z ~ N(0, v_t I) with v_t = drift_scale / t (or drift_scale).
inline Vector advance_ground_truth(std::span<const double> theta, std::size_t t,
                                   const DriftingScene& scene, Rng& rng) {
  detail::require(t >= 1, "advance_ground_truth: t must be >= 1");
  detail::require_same_size(theta.size(), scene.dimension, "advance_ground_truth");
  Vector next(theta.begin(), theta.end());
  Vector z = gaussian_vector(rng, scene.dimension, scene.drift_variance(t));
  axpy(1.0, z, next);
  if (scene.projection_set) scene.projection_set->project_in_place(next);
  return next;
}

/// Full path theta_1 .. theta_T starting at scene.initial_theta (projected into C).
inline GroundTruthPath generate_path(const DriftingScene& scene, Rng& rng) {
  scene.validate();
  GroundTruthPath path;
  path.thetas.reserve(scene.horizon);
  Vector theta = scene.initial_theta;
  if (scene.projection_set) scene.projection_set->project_in_place(theta);
  path.thetas.push_back(theta);
  for (std::size_t t = 1; t < scene.horizon; ++t) {
    theta = advance_ground_truth(theta, t, scene, rng);
    path.thetas.push_back(theta);
  }
  return path;
}

/// u_i ~ N(0, I_n), d_i = theta_true . u_i + nu_i with nu_i ~ N(0, noise_variance).
inline SampleBatch sample_batch(std::span<const double> theta_true, std::size_t m,
                                double noise_variance, Rng& rng, std::size_t t = 1) {
  detail::require(m >= 1, "sample_batch: m must be >= 1");
  detail::require(noise_variance >= 0.0, "sample_batch: negative noise variance");
  const std::size_t n = theta_true.size();
  SampleBatch batch;
  batch.t = t;
  batch.inputs.reserve(m);
  batch.outputs.reserve(m);
  const double noise_sd = std::sqrt(noise_variance);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    Vector u(n);
    for (double& v : u) v = normal(rng);
    const double nu = noise_sd > 0.0 ? noise_sd * normal(rng) : 0.0;
    batch.outputs.push_back(dot(theta_true, u) + nu);
    batch.inputs.push_back(std::move(u));
  }
  return batch;
}

/// Empirical law of a batch as regression atoms (u, d) with equal weights.
inline DiscreteDistribution empirical_distribution(const SampleBatch& batch) {
  std::vector<Vector> atoms;
  atoms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    atoms.push_back(regression_atom(batch.inputs[i], batch.outputs[i]));
  }
  return DiscreteDistribution::uniform(std::move(atoms));
}

/// Path of T discrete measures with fixed weights whose atoms move by a total
/// weighted displacement of exactly eta_t between rounds t and t+1, so the
/// identity coupling certifies W1(P_t, P_{t+1}) <= eta_t.
inline std::vector<DiscreteDistribution> make_discrete_drift(std::size_t atom_count,
                                                             std::size_t dimension,
                                                             const std::vector<double>& eta_schedule,
                                                             Rng& rng) {
  detail::require(atom_count >= 1, "make_discrete_drift: atom_count must be >= 1");
  detail::require(dimension >= 1, "make_discrete_drift: dimension must be >= 1");
  for (double eta : eta_schedule) {
    detail::require(eta >= 0.0 && std::isfinite(eta), "make_discrete_drift: negative eta");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vector> atoms;
  for (std::size_t k = 0; k < atom_count; ++k) atoms.push_back(gaussian_vector(rng, dimension));
  std::vector<double> weights(atom_count);
  double total = 0.0;
  for (double& w : weights) {
    w = 0.1 + unit(rng);
    total += w;
  }
  for (double& w : weights) w /= total;
  double partial = 0.0;
  for (std::size_t k = 0; k + 1 < atom_count; ++k) partial += weights[k];
  weights.back() = 1.0 - partial;

  std::vector<DiscreteDistribution> path;
  path.reserve(eta_schedule.size() + 1);
  path.emplace_back(atoms, weights);
  for (double eta : eta_schedule) {
    // share[k] is the fraction of the budget spent on atom k; atom k moves by
    // eta * share[k] / weight[k] along a random unit direction.
    std::vector<double> share(atom_count);
    double share_total = 0.0;
    for (double& s : share) {
      s = unit(rng) + 1e-3;
      share_total += s;
    }
    for (std::size_t k = 0; k < atom_count; ++k) {
      Vector dir = gaussian_vector(rng, dimension);
      double len = norm(dir);
      if (len == 0.0) {
        dir.assign(dimension, 0.0);
        dir[0] = 1.0;
        len = 1.0;
      }
      const double step = weights[k] > 0.0 ? eta * (share[k] / share_total) / weights[k] : 0.0;
      axpy(step / len, dir, atoms[k]);
    }
    path.emplace_back(atoms, weights);
  }
  return path;
}

}  // namespace driftbench
