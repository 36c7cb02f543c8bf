#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "driftbench/core.hpp"
#include "driftbench/optim.hpp"

namespace driftbench::harness {

enum class Experiment { kAdaptiveFiltering, kCVaR };
enum class Variant { kUnconstrained, kBoxConstrained, kL1Regularized };

inline const char* to_string(Experiment e) {
  return e == Experiment::kAdaptiveFiltering ? "adaptive_filtering" : "cvar";
}

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kUnconstrained: return "unconstrained";
    case Variant::kBoxConstrained: return "box_constrained";
    case Variant::kL1Regularized: return "l1_regularized";
  }
  return "?";
}

inline const char* to_string(ScheduleKind k) {
  return k == ScheduleKind::kConstantOverSqrtHorizon ? "constant" : "decaying";
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "adaptive_filtering" || s == "filtering") return Experiment::kAdaptiveFiltering;
  if (s == "cvar") return Experiment::kCVaR;
  throw std::invalid_argument("unknown experiment '" + s + "'");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "unconstrained") return Variant::kUnconstrained;
  if (s == "box_constrained" || s == "box") return Variant::kBoxConstrained;
  if (s == "l1_regularized" || s == "l1") return Variant::kL1Regularized;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

inline ScheduleKind parse_schedule(const std::string& s) {
  if (s == "constant") return ScheduleKind::kConstantOverSqrtHorizon;
  if (s == "decaying") return ScheduleKind::kDecayingOverSqrtRound;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::kAdaptiveFiltering;
  Variant variant = Variant::kUnconstrained;
  std::size_t T = 500;
  std::size_t n = 5;
  std::size_t m = 5;
  double alpha = 0.95;
  ScheduleKind schedule = ScheduleKind::kConstantOverSqrtHorizon;
  double step_c = 0.01;
  std::size_t runs = 100;
  std::uint64_t seed = 20240101;
  double noise_variance = 0.5;
  double drift_scale = 1e-4;
  double box_lower = -5.0;
  double box_upper = 5.0;
  double l1_weight = 1.0;
  OracleSettings oracle;
  std::size_t evaluation_samples = 1000;  // CVaR realized loss
  std::size_t threads = 0;                // 0: hardware concurrency
  std::size_t max_retries = 10;

  void validate() const {
    detail::require(T >= 2, "config: T must be >= 2");
    detail::require(n >= 1, "config: n must be >= 1");
    detail::require(m >= 1, "config: m must be >= 1");
    detail::require(runs >= 1, "config: runs must be >= 1");
    detail::require(alpha > 0.0 && alpha <= 1.0, "config: alpha must lie in (0, 1]");
    detail::require(step_c > 0.0, "config: step constant must be positive");
    detail::require(noise_variance >= 0.0, "config: noise_variance must be >= 0");
    detail::require(drift_scale >= 0.0, "config: drift_scale must be >= 0");
    detail::require(box_lower <= box_upper, "config: box lower > upper");
    detail::require(l1_weight >= 0.0, "config: l1 weight must be >= 0");
    detail::require(evaluation_samples >= 1, "config: evaluation_samples must be >= 1");
    oracle.validate();
  }

  StepSchedule step_schedule() const {
    return schedule == ScheduleKind::kConstantOverSqrtHorizon ? StepSchedule::constant(step_c, T)
                                                              : StepSchedule::decaying(step_c);
  }
};

/// Settings used in the published experiments for each problem.
inline ExperimentConfig defaults(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  if (e == Experiment::kCVaR) {
    c.m = 20;
    c.oracle.objective_tolerance = 0.01;
  }
  return c;
}

inline std::string describe(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "experiment=" << to_string(c.experiment) << '\n'
     << "variant=" << to_string(c.variant) << '\n'
     << "T=" << c.T << '\n'
     << "n=" << c.n << '\n'
     << "m=" << c.m << '\n'
     << "alpha=" << c.alpha << '\n'
     << "schedule=" << to_string(c.schedule) << '\n'
     << "step_c=" << c.step_c << '\n'
     << "runs=" << c.runs << '\n'
     << "seed=" << c.seed << '\n'
     << "noise_variance=" << c.noise_variance << '\n'
     << "drift_scale=" << c.drift_scale << '\n'
     << "box=[" << c.box_lower << ", " << c.box_upper << "]\n"
     << "l1_weight=" << c.l1_weight << '\n'
     << "oracle_step=" << c.oracle.step << '\n'
     << "oracle_tolerance=" << c.oracle.objective_tolerance << '\n'
     << "oracle_max_iterations=" << c.oracle.max_iterations << '\n'
     << "oracle_samples=" << c.oracle.oracle_sample_count << '\n'
     << "evaluation_samples=" << c.evaluation_samples << '\n'
     << "max_retries=" << c.max_retries << '\n';
  return os.str();
}

}  // namespace driftbench::harness
