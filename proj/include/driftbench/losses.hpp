#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

#include "driftbench/core.hpp"
#include "driftbench/distribution.hpp"
#include "driftbench/drift.hpp"

namespace driftbench {

// ---------------------------------------------------------------------------
// Squared loss of the linear predictor: (d - theta . u)^2
// ---------------------------------------------------------------------------

inline double squared_value(std::span<const double> theta, std::span<const double> u, double d) {
  const double r = d - dot(theta, u);
  return r * r;
}

inline Vector squared_grad(std::span<const double> theta, std::span<const double> u, double d) {
  const double r = d - dot(theta, u);
  return scaled(u, -2.0 * r);
}

inline void accumulate_squared_grad(std::span<const double> theta, std::span<const double> u,
                                    double d, double weight, std::span<double> out) {
  const double r = d - dot(theta, u);
  axpy(-2.0 * r * weight, u, out);
}

// ---------------------------------------------------------------------------
// CVaR surrogate l_alpha(theta, h; u, d) = h + (1/alpha) (l(theta; u, d) - h)_+
// ---------------------------------------------------------------------------

inline void require_alpha(double alpha) {
  detail::require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
}

inline double cvar_pointwise(std::span<const double> theta, double h, std::span<const double> u,
                             double d, double alpha) {
  require_alpha(alpha);
  return h + std::max(squared_value(theta, u, d) - h, 0.0) / alpha;
}

/// Membership in the event set: base loss strictly above h. Ties are outside.
inline bool in_event_set(std::span<const double> theta, double h, std::span<const double> u,
                         double d) {
  return squared_value(theta, u, d) - h > 0.0;
}

/// Indicator-based gradient estimator over a batch, returned as (theta-block, h).
inline Vector cvar_stochastic_grad(std::span<const double> theta, double h,
                                   const SampleBatch& batch, double alpha) {
  require_alpha(alpha);
  detail::require(batch.size() >= 1, "cvar_stochastic_grad: empty batch");
  const std::size_t n = theta.size();
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  Vector g(n + 1, 0.0);
  std::span<double> g_theta(g.data(), n);
  double hits = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& u = batch.inputs[i];
    const double d = batch.outputs[i];
    if (!in_event_set(theta, h, u, d)) continue;
    hits += 1.0;
    accumulate_squared_grad(theta, u, d, inv_m / alpha, g_theta);
  }
  g[n] = 1.0 - hits * inv_m / alpha;
  return g;
}

/// Empirical L_alpha(theta, h) over a batch.
inline double cvar_batch_value(std::span<const double> theta, double h, const SampleBatch& batch,
                               double alpha) {
  require_alpha(alpha);
  detail::require(batch.size() >= 1, "cvar_batch_value: empty batch");
  double excess = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    excess += std::max(squared_value(theta, batch.inputs[i], batch.outputs[i]) - h, 0.0);
  }
  return h + excess / (alpha * static_cast<double>(batch.size()));
}

/// Splits a stacked CVaR iterate x = (theta, h).
inline std::span<const double> cvar_theta(std::span<const double> x) {
  return x.subspan(0, x.size() - 1);
}
inline double cvar_h(std::span<const double> x) { return x.back(); }

// ---------------------------------------------------------------------------
// Population quantities over regression atoms
// ---------------------------------------------------------------------------

struct SquaredLossModel {};

struct CVaRLossModel {
  double alpha = 0.95;
};

/// Gradient together with a flag raised when some atom sits exactly on the
/// event-set boundary (the one-sided value is returned in that case).
struct PopulationGradient {
  Vector grad;
  bool tie = false;
};

inline double population_value(const SquaredLossModel&, std::span<const double> theta,
                               const DiscreteDistribution& p) {
  detail::require_same_size(theta.size() + 1, p.dimension(), "population_value");
  return p.expectation([&](const Vector& w) {
    return squared_value(theta, regression_input(w), regression_output(w));
  });
}

inline PopulationGradient population_grad(const SquaredLossModel&, std::span<const double> theta,
                                          const DiscreteDistribution& p) {
  detail::require_same_size(theta.size() + 1, p.dimension(), "population_grad");
  PopulationGradient out{Vector(theta.size(), 0.0), false};
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& w = p.atom(k);
    accumulate_squared_grad(theta, regression_input(w), regression_output(w), p.weight(k),
                            out.grad);
  }
  return out;
}

/// L_alpha(theta, h) with the stacked iterate x = (theta, h).
inline double population_value(const CVaRLossModel& model, std::span<const double> x,
                               const DiscreteDistribution& p) {
  require_alpha(model.alpha);
  detail::require_same_size(x.size(), p.dimension(), "population_value");
  const auto theta = cvar_theta(x);
  const double h = cvar_h(x);
  return h + p.expectation([&](const Vector& w) {
           return std::max(squared_value(theta, regression_input(w), regression_output(w)) - h,
                           0.0);
         }) / model.alpha;
}

inline PopulationGradient population_grad(const CVaRLossModel& model, std::span<const double> x,
                                          const DiscreteDistribution& p) {
  require_alpha(model.alpha);
  detail::require_same_size(x.size(), p.dimension(), "population_grad");
  const auto theta = cvar_theta(x);
  const double h = cvar_h(x);
  const std::size_t n = theta.size();
  PopulationGradient out{Vector(n + 1, 0.0), false};
  std::span<double> g_theta(out.grad.data(), n);
  double event_mass = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& w = p.atom(k);
    const auto u = regression_input(w);
    const double d = regression_output(w);
    const double excess = squared_value(theta, u, d) - h;
    if (excess == 0.0) out.tie = true;
    if (excess <= 0.0) continue;
    event_mass += p.weight(k);
    accumulate_squared_grad(theta, u, d, p.weight(k) / model.alpha, g_theta);
  }
  out.grad[n] = 1.0 - event_mass / model.alpha;
  return out;
}

// ---------------------------------------------------------------------------
// VaR / CVaR of scalar discrete laws
// ---------------------------------------------------------------------------

namespace detail {

struct ScalarLaw {
  std::vector<double> values;   // sorted ascending, distinct
  std::vector<double> weights;  // matching masses
};

inline ScalarLaw sorted_scalar_law(const DiscreteDistribution& z) {
  require(z.dimension() == 1, "scalar law expected");
  const auto c = canonicalize(z);
  ScalarLaw law;
  for (std::size_t i = 0; i < c.size(); ++i) {
    law.values.push_back(c.atom(i)[0]);
    law.weights.push_back(c.weight(i));
  }
  return law;
}

inline double cvar_objective(const ScalarLaw& law, double h, double alpha) {
  double excess = 0.0;
  for (std::size_t i = 0; i < law.values.size(); ++i) {
    excess += law.weights[i] * std::max(law.values[i] - h, 0.0);
  }
  return h + excess / alpha;
}

}  // namespace detail

/// inf{z : P(Z <= z) >= 1 - alpha}
inline double var_discrete(const DiscreteDistribution& z, double alpha) {
  require_alpha(alpha);
  const auto law = detail::sorted_scalar_law(z);
  const double level = 1.0 - alpha;
  double cdf = 0.0;
  for (std::size_t i = 0; i < law.values.size(); ++i) {
    cdf += law.weights[i];
    // Relative slack so that e.g. cdf = 0.5 computed as 0.4999999999999999 still counts.
    if (cdf >= level - 1e-12) return law.values[i];
  }
  return law.values.back();
}

struct CVaRMinimizer {
  double value = 0.0;
  double h = 0.0;  // largest minimizing threshold among atoms
};

/// inf_h {h + E(Z - h)_+ / alpha} by enumeration of the atoms (the objective is
/// piecewise linear and convex in h with breakpoints at the atoms).
inline CVaRMinimizer cvar_minimizer(const DiscreteDistribution& z, double alpha) {
  require_alpha(alpha);
  const auto law = detail::sorted_scalar_law(z);
  CVaRMinimizer best{detail::cvar_objective(law, law.values.front(), alpha), law.values.front()};
  for (double h : law.values) {
    const double v = detail::cvar_objective(law, h, alpha);
    const double slack = 1e-14 * std::max(1.0, std::abs(best.value));
    if (v < best.value - slack) {
      best = {v, h};
    } else if (v <= best.value + slack) {
      best.h = h;
    }
  }
  return best;
}

inline double cvar_discrete(const DiscreteDistribution& z, double alpha) {
  return cvar_minimizer(z, alpha).value;
}

// ---------------------------------------------------------------------------
// Regularizers and their proximal maps
// ---------------------------------------------------------------------------

struct NoRegularizer {};
struct BoxIndicator {
  BoxSet box;
};
struct L1Penalty {
  double weight = 1.0;
};

/// Convex regularizer acting on the leading `extent` coordinates of an iterate
/// (all coordinates when extent is npos). Trailing coordinates are free; the
/// CVaR threshold h uses this.
struct Regularizer {
  static constexpr std::size_t kAll = static_cast<std::size_t>(-1);

  std::variant<NoRegularizer, BoxIndicator, L1Penalty> kind = NoRegularizer{};
  std::size_t extent = kAll;

  static Regularizer none() { return {}; }
  static Regularizer box(BoxSet b, std::size_t extent = kAll) {
    b.validate();
    return {BoxIndicator{std::move(b)}, extent};
  }
  static Regularizer l1(double weight, std::size_t extent = kAll) {
    detail::require(weight >= 0.0 && std::isfinite(weight), "l1 weight must be >= 0");
    return {L1Penalty{weight}, extent};
  }

  bool is_none() const { return std::holds_alternative<NoRegularizer>(kind); }

  std::size_t active_count(std::size_t size) const { return std::min(extent, size); }
};

inline double regularizer_value(const Regularizer& reg, std::span<const double> x) {
  const auto head = x.subspan(0, reg.active_count(x.size()));
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, NoRegularizer>) {
          return 0.0;
        } else if constexpr (std::is_same_v<R, BoxIndicator>) {
          return r.box.contains(head) ? 0.0 : kInfinity;
        } else {
          return r.weight * l1_norm(head);
        }
      },
      reg.kind);
}

inline double soft_threshold(double v, double tau) {
  const double mag = std::max(std::abs(v) - tau, 0.0);
  return v > 0.0 ? mag : (v < 0.0 ? -mag : 0.0);
}

/// prox_{gamma R}(x) = argmin_y { ||y - x||^2 / (2 gamma) + R(y) }
inline Vector prox(const Regularizer& reg, std::span<const double> x, double gamma) {
  detail::require(gamma > 0.0, "prox: gamma must be positive");
  Vector y(x.begin(), x.end());
  const std::size_t k = reg.active_count(y.size());
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, BoxIndicator>) {
          r.box.project_in_place(std::span<double>(y.data(), k));
        } else if constexpr (std::is_same_v<R, L1Penalty>) {
          for (std::size_t i = 0; i < k; ++i) y[i] = soft_threshold(y[i], gamma * r.weight);
        }
      },
      reg.kind);
  return y;
}

}  // namespace driftbench
