#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "driftbench/core.hpp"
#include "driftbench/losses.hpp"

namespace driftbench {

enum class ScheduleKind { kConstantOverSqrtHorizon, kDecayingOverSqrtRound };

/// gamma_t = c / sqrt(T) (constant) or c / sqrt(t) (decaying).
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::kConstantOverSqrtHorizon;
  double c = 0.01;
  std::size_t horizon = 500;

  static StepSchedule constant(double c, std::size_t horizon) {
    return {ScheduleKind::kConstantOverSqrtHorizon, c, horizon};
  }
  static StepSchedule decaying(double c) { return {ScheduleKind::kDecayingOverSqrtRound, c, 1}; }

  void validate() const {
    detail::require(c > 0.0 && std::isfinite(c), "StepSchedule: c must be positive");
    detail::require(horizon >= 1, "StepSchedule: horizon must be >= 1");
  }
};

inline double step_size(const StepSchedule& schedule, std::size_t t) {
  detail::require(t >= 1, "step_size: t must be >= 1");
  schedule.validate();
  const double denom = schedule.kind == ScheduleKind::kConstantOverSqrtHorizon
                           ? static_cast<double>(schedule.horizon)
                           : static_cast<double>(t);
  return schedule.c / std::sqrt(denom);
}

struct OptimizerState {
  Vector x;
  std::size_t t = 1;
  StepSchedule schedule;
};

/// Norm above which an online run is declared divergent.
inline constexpr double kDivergenceNorm = 1e8;

namespace detail {

inline void guard_iterate(const Vector& x) {
  if (!all_finite(x) || norm(x) > kDivergenceNorm) {
    throw DivergenceError("iterate diverged (norm above 1e8 or non-finite)");
  }
}

}  // namespace detail

/// x_{t+1} = x_t - gamma_t g
inline OptimizerState sgd_step(OptimizerState state, std::span<const double> grad_estimate) {
  detail::require_same_size(grad_estimate.size(), state.x.size(), "sgd_step");
  const double gamma = step_size(state.schedule, state.t);
  axpy(-gamma, grad_estimate, state.x);
  detail::guard_iterate(state.x);
  ++state.t;
  return state;
}

/// x_{t+1} = prox_{gamma_t R}(x_t - gamma_t g)
inline OptimizerState prox_sgd_step(OptimizerState state, std::span<const double> grad_estimate,
                                    const Regularizer& reg) {
  detail::require_same_size(grad_estimate.size(), state.x.size(), "prox_sgd_step");
  const double gamma = step_size(state.schedule, state.t);
  axpy(-gamma, grad_estimate, state.x);
  if (!reg.is_none()) state.x = prox(reg, state.x, gamma);
  detail::guard_iterate(state.x);
  ++state.t;
  return state;
}

// ---------------------------------------------------------------------------
// Offline (batch) oracle
// ---------------------------------------------------------------------------

struct OracleSettings {
  double step = 0.01;
  double objective_tolerance = 1e-6;
  std::size_t max_iterations = 1000;
  std::size_t oracle_sample_count = 100;

  void validate() const {
    detail::require(step > 0.0, "OracleSettings: step must be positive");
    detail::require(objective_tolerance > 0.0, "OracleSettings: tolerance must be positive");
    detail::require(max_iterations >= 1, "OracleSettings: max_iterations must be >= 1");
    detail::require(oracle_sample_count >= 1, "OracleSettings: sample count must be >= 1");
  }
};

/// Smooth part of a composite objective F + R.
struct SmoothObjective {
  std::function<double(std::span<const double>)> value;
  std::function<Vector(std::span<const double>)> grad;
};

struct OracleResult {
  Vector x;
  double value = 0.0;  // F(x) + R(x)
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective at the start and after each iteration
};

/// Batch (proximal) gradient descent with a constant step until two successive
/// objectives differ by less than the tolerance, or the iteration cap.
inline OracleResult offline_solve(const SmoothObjective& objective, const Regularizer& reg,
                                  Vector init, const OracleSettings& settings) {
  settings.validate();
  auto total = [&](std::span<const double> x) {
    return objective.value(x) + regularizer_value(reg, x);
  };
  OracleResult out;
  out.x = std::move(init);
  double current = total(out.x);
  // A start outside the domain of an indicator is projected first.
  if (!std::isfinite(current) && !reg.is_none()) {
    out.x = prox(reg, out.x, settings.step);
    current = total(out.x);
  }
  if (!std::isfinite(current)) throw DivergenceError("offline_solve: non-finite objective");
  out.objective_trace.push_back(current);
  for (std::size_t k = 0; k < settings.max_iterations; ++k) {
    Vector g = objective.grad(out.x);
    axpy(-settings.step, g, out.x);
    if (!reg.is_none()) out.x = prox(reg, out.x, settings.step);
    const double next = total(out.x);
    if (!std::isfinite(next)) throw DivergenceError("offline_solve: non-finite objective");
    out.objective_trace.push_back(next);
    out.iterations = k + 1;
    const double change = std::abs(current - next);
    current = next;
    if (change < settings.objective_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.value = current;
  return out;
}

/// Smooth objective of a loss model under a discrete law.
template <class Model>
SmoothObjective population_objective(const Model& model, const DiscreteDistribution& p) {
  return {[model, &p](std::span<const double> x) { return population_value(model, x, p); },
          [model, &p](std::span<const double> x) { return population_grad(model, x, p).grad; }};
}

}  // namespace driftbench
