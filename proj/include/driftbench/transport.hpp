#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "driftbench/core.hpp"
#include "driftbench/distribution.hpp"

namespace driftbench {

/// Coupling between two discrete measures: mass(i, j) moves P-atom i to Q-atom j.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> mass;  // row-major rows x cols
  double total_cost = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return mass[i * cols + j]; }
};

struct TransportResult {
  double distance = 0.0;
  TransportPlan plan;
};

struct TransportOptions {
  std::size_t max_support = 64;
};

namespace detail {

/// Successive shortest paths with Johnson potentials on the dense bipartite
/// transportation network. Arcs source->sink are uncapacitated; the residual
/// arc sink->source exists while the pair carries flow. Each augmentation
/// exhausts a supply, a demand or a residual arc, so the loop is finite, and
/// the result is an exact optimum up to floating-point rounding.
inline TransportPlan solve_transportation(const std::vector<double>& supply,
                                          const std::vector<double>& demand,
                                          const std::vector<double>& cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  const std::size_t nodes = n + m;
  constexpr double kMassEps = 1e-15;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  TransportPlan plan;
  plan.rows = n;
  plan.cols = m;
  plan.mass.assign(n * m, 0.0);

  std::vector<double> supply_left = supply;
  std::vector<double> demand_left = demand;
  std::vector<double> potential(nodes, 0.0);
  std::vector<double> dist(nodes);
  std::vector<std::ptrdiff_t> parent(nodes);
  std::vector<char> done(nodes);

  auto has_supply = [&] {
    return std::any_of(supply_left.begin(), supply_left.end(),
                       [](double s) { return s > kMassEps; });
  };

  while (has_supply()) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (supply_left[i] > kMassEps) dist[i] = 0.0;
    }

    for (std::size_t iter = 0; iter < nodes; ++iter) {
      std::size_t v = nodes;
      double best = kInf;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (!done[u] && dist[u] < best) {
          best = dist[u];
          v = u;
        }
      }
      if (v == nodes) break;
      done[v] = 1;
      if (v < n) {
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t w = n + j;
          const double reduced = std::max(0.0, cost[v * m + j] + potential[v] - potential[w]);
          if (dist[v] + reduced < dist[w]) {
            dist[w] = dist[v] + reduced;
            parent[w] = static_cast<std::ptrdiff_t>(v);
          }
        }
      } else {
        const std::size_t j = v - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (plan.mass[i * m + j] <= kMassEps) continue;
          const double reduced = std::max(0.0, -cost[i * m + j] + potential[v] - potential[i]);
          if (dist[v] + reduced < dist[i]) {
            dist[i] = dist[v] + reduced;
            parent[i] = static_cast<std::ptrdiff_t>(v);
          }
        }
      }
    }

    std::size_t target = nodes;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t w = n + j;
      if (demand_left[j] > kMassEps && dist[w] < kInf &&
          (target == nodes || dist[w] < dist[target])) {
        target = w;
      }
    }
    // Supplies and demands disagree only by rounding at this point.
    if (target == nodes) break;

    const double cap = dist[target];
    for (std::size_t v = 0; v < nodes; ++v) potential[v] += std::min(dist[v], cap);

    double bottleneck = demand_left[target - n];
    std::size_t v = target;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u >= n) bottleneck = std::min(bottleneck, plan.mass[v * m + (u - n)]);
      v = u;
    }
    bottleneck = std::min(bottleneck, supply_left[v]);

    supply_left[v] -= bottleneck;
    demand_left[target - n] -= bottleneck;
    v = target;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u < n) {
        plan.mass[u * m + (v - n)] += bottleneck;
      } else {
        plan.mass[v * m + (u - n)] -= bottleneck;
      }
      v = u;
    }
  }

  for (double& x : plan.mass) x = std::max(x, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < plan.mass.size(); ++k) total += plan.mass[k] * cost[k];
  plan.total_cost = total;
  return plan;
}

}  // namespace detail

/// Exact type-1 Wasserstein distance between two discrete measures with the
/// Euclidean ground cost, together with an optimal coupling.
inline TransportResult w1_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                   const TransportOptions& options = {}) {
  detail::require_same_size(p.dimension(), q.dimension(), "w1_discrete");
  if (p.size() > options.max_support || q.size() > options.max_support) {
    throw SizeLimitError("w1_discrete: support size " +
                         std::to_string(std::max(p.size(), q.size())) + " exceeds cap " +
                         std::to_string(options.max_support));
  }
  const std::size_t n = p.size();
  const std::size_t m = q.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = distance(p.atom(i), q.atom(j));
  }
  TransportResult result;
  result.plan = detail::solve_transportation(p.weights(), q.weights(), cost);
  result.distance = result.plan.total_cost;
  return result;
}

/// W1 between two equal-size, equal-weight samples on the line.
inline double w1_1d(std::vector<double> samples_p, std::vector<double> samples_q) {
  detail::require(samples_p.size() == samples_q.size(), "w1_1d: unequal sample counts");
  detail::require(!samples_p.empty(), "w1_1d: empty samples");
  std::sort(samples_p.begin(), samples_p.end());
  std::sort(samples_q.begin(), samples_q.end());
  double s = 0.0;
  for (std::size_t i = 0; i < samples_p.size(); ++i) s += std::abs(samples_p[i] - samples_q[i]);
  return s / static_cast<double>(samples_p.size());
}

/// Total variation sup_A |P(A) - Q(A)| = (1/2) sum |p_i - q_i| over the union
/// of both supports.
inline double total_variation_discrete(const DiscreteDistribution& p,
                                       const DiscreteDistribution& q) {
  detail::require_same_size(p.dimension(), q.dimension(), "total_variation_discrete");
  std::map<Vector, std::pair<double, double>> aligned;
  for (std::size_t i = 0; i < p.size(); ++i) aligned[p.atom(i)].first += p.weight(i);
  for (std::size_t j = 0; j < q.size(); ++j) aligned[q.atom(j)].second += q.weight(j);
  double s = 0.0;
  for (const auto& [atom, w] : aligned) s += std::abs(w.first - w.second);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

}  // namespace driftbench
