#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "driftbench/drift.hpp"
#include "driftbench/harness/config.hpp"
#include "driftbench/losses.hpp"
#include "driftbench/optim.hpp"
#include "driftbench/random.hpp"
#include "driftbench/regret.hpp"

namespace driftbench::harness {

/// Added to the master seed on each retry of a degenerate run.
inline constexpr std::uint64_t kRetrySeedOffset = 0x9E3779B97F4A7C15ULL;

struct PathOptions {
  bool keep_iterates = false;
  // Route the unconstrained variant through prox_sgd_step with a none regularizer.
  bool force_prox_path = false;
};

struct PathRecord {
  RegretLedger ledger;
  std::vector<Vector> iterates;  // x_1 .. x_T when requested
  std::size_t oracle_nonconverged = 0;
};

struct AggregateResult {
  ExperimentConfig config;
  std::vector<double> mean;  // mean relative regret, index t - 1
  std::vector<double> std;   // sample standard deviation across runs
  std::size_t n_runs = 0;
  std::size_t failures = 0;
  std::size_t retries = 0;
  std::size_t oracle_nonconverged = 0;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;
};

inline Regularizer make_regularizer(const ExperimentConfig& c) {
  switch (c.variant) {
    case Variant::kUnconstrained: return Regularizer::none();
    case Variant::kBoxConstrained:
      return Regularizer::box(BoxSet::uniform(c.n, c.box_lower, c.box_upper), c.n);
    case Variant::kL1Regularized: return Regularizer::l1(c.l1_weight, c.n);
  }
  return Regularizer::none();
}

inline DriftingScene make_scene(const ExperimentConfig& c) {
  DriftingScene scene;
  scene.dimension = c.n;
  scene.initial_theta = Vector(c.n, 1.0);
  scene.drift_scale = c.drift_scale;
  scene.drift_decay = DriftDecay::kInverseTime;
  scene.noise_variance = c.noise_variance;
  scene.horizon = c.T;
  if (c.variant == Variant::kBoxConstrained) {
    scene.projection_set = BoxSet::uniform(c.n, c.box_lower, c.box_upper);
  }
  return scene;
}

namespace internal {

inline OptimizerState advance(OptimizerState state, const Vector& grad, const Regularizer& reg,
                              bool force_prox) {
  if (reg.is_none() && !force_prox) return sgd_step(std::move(state), grad);
  return prox_sgd_step(std::move(state), grad, reg);
}

/// L_alpha(theta, h) averaged over `count` fresh samples, drawn without storing them.
inline double cvar_on_fresh_samples(std::span<const double> theta, double h,
                                    std::span<const double> theta_true, std::size_t count,
                                    double noise_variance, double alpha, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_sd = std::sqrt(noise_variance);
  Vector u(theta.size());
  double excess = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (double& v : u) v = normal(rng);
    const double nu = noise_sd > 0.0 ? noise_sd * normal(rng) : 0.0;
    const double d = dot(theta_true, u) + nu;
    excess += std::max(squared_value(theta, u, d) - h, 0.0);
  }
  return h + excess / (alpha * static_cast<double>(count));
}

inline PathRecord filtering_path(const ExperimentConfig& c, std::uint64_t seed, std::size_t run,
                                 const PathOptions& options) {
  const auto scene = make_scene(c);
  const auto reg = make_regularizer(c);
  auto path_rng = make_rng(seed, run, 0, Stream::kDriftPath);
  const auto path = generate_path(scene, path_rng);
  const double s = c.noise_variance;

  PathRecord rec;
  OptimizerState state{Vector(c.n, 0.0), 1, c.step_schedule()};
  for (std::size_t t = 1; t <= c.T; ++t) {
    const Vector& target = path.at(t);
    if (options.keep_iterates) rec.iterates.push_back(state.x);
    // E[(d - theta.u)^2] = ||theta - target||^2 + s for u ~ N(0, I), independent noise.
    const double realized = squared_distance(state.x, target) + s + regularizer_value(reg, state.x);
    double optimal = s + regularizer_value(reg, target);
    if (c.variant == Variant::kL1Regularized) {
      SmoothObjective f{
          [&](std::span<const double> x) { return squared_distance(x, target) + s; },
          [&](std::span<const double> x) { return scaled(subtract(x, target), 2.0); }};
      optimal = offline_solve(f, reg, target, c.oracle).value;
    }
    rec.ledger.record(t, realized, optimal);
    if (t == c.T) break;

    auto rng = make_rng(seed, run, t, Stream::kLearningBatch);
    const auto batch = sample_batch(target, c.m, s, rng, t);
    Vector grad(c.n, 0.0);
    const double w = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      accumulate_squared_grad(state.x, batch.inputs[i], batch.outputs[i], w, grad);
    }
    state = advance(std::move(state), grad, reg, options.force_prox_path);
  }
  return rec;
}

inline PathRecord cvar_path(const ExperimentConfig& c, std::uint64_t seed, std::size_t run,
                            const PathOptions& options) {
  const auto scene = make_scene(c);
  const auto reg = make_regularizer(c);
  auto path_rng = make_rng(seed, run, 0, Stream::kDriftPath);
  const auto path = generate_path(scene, path_rng);
  const double s = c.noise_variance;
  const std::size_t n = c.n;

  PathRecord rec;
  OptimizerState state{Vector(n + 1, 0.0), 1, c.step_schedule()};
  for (std::size_t t = 1; t <= c.T; ++t) {
    const Vector& target = path.at(t);
    if (options.keep_iterates) rec.iterates.push_back(state.x);

    auto eval_rng = make_rng(seed, run, t, Stream::kEvaluationSample);
    const double realized =
        cvar_on_fresh_samples(cvar_theta(state.x), cvar_h(state.x), target, c.evaluation_samples,
                              s, c.alpha, eval_rng) +
        regularizer_value(reg, state.x);

    auto oracle_rng = make_rng(seed, run, t, Stream::kOracleSample);
    const auto oracle_batch = sample_batch(target, c.oracle.oracle_sample_count, s, oracle_rng, t);
    SmoothObjective f{[&](std::span<const double> x) {
                        return cvar_batch_value(cvar_theta(x), cvar_h(x), oracle_batch, c.alpha);
                      },
                      [&](std::span<const double> x) {
                        return cvar_stochastic_grad(cvar_theta(x), cvar_h(x), oracle_batch,
                                                    c.alpha);
                      }};
    const auto oracle = offline_solve(f, reg, Vector(n + 1, 0.0), c.oracle);
    if (!oracle.converged) ++rec.oracle_nonconverged;
    rec.ledger.record(t, realized, oracle.value);
    if (t == c.T) break;

    auto rng = make_rng(seed, run, t, Stream::kLearningBatch);
    const auto batch = sample_batch(target, c.m, s, rng, t);
    const Vector grad = cvar_stochastic_grad(cvar_theta(state.x), cvar_h(state.x), batch, c.alpha);
    state = advance(std::move(state), grad, reg, options.force_prox_path);
  }
  return rec;
}

}  // namespace internal

/// One sample path of the configured experiment. `seed` is the master seed
/// (already shifted on retries); `run` selects the substream.
inline PathRecord simulate_path(const ExperimentConfig& c, std::uint64_t seed, std::size_t run,
                                const PathOptions& options = {}) {
  c.validate();
  return c.experiment == Experiment::kAdaptiveFiltering ? internal::filtering_path(c, seed, run, options)
                                                        : internal::cvar_path(c, seed, run, options);
}

namespace internal {

struct RunSlot {
  bool ok = false;
  std::vector<double> relative;
  std::size_t retries = 0;
  std::size_t oracle_nonconverged = 0;
  std::vector<std::string> notes;
};

inline bool finite_series(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline RunSlot execute_run(const ExperimentConfig& c, std::size_t run) {
  RunSlot slot;
  for (std::size_t attempt = 0; attempt <= c.max_retries; ++attempt) {
    const std::uint64_t seed = c.seed + attempt * kRetrySeedOffset;
    std::string reason;
    try {
      auto rec = simulate_path(c, seed, run);
      slot.oracle_nonconverged += rec.oracle_nonconverged;
      if (rec.ledger.regret(1) == 0.0) {
        reason = "zero first-round regret";
      } else {
        auto rel = rec.ledger.relative_regret_series();
        if (finite_series(rel)) {
          slot.ok = true;
          slot.relative = std::move(rel);
          return slot;
        }
        reason = "non-finite relative regret";
      }
    } catch (const DivergenceError& e) {
      reason = e.what();
    }
    slot.notes.push_back("run " + std::to_string(run) + " attempt " + std::to_string(attempt) +
                         ": " + reason + (attempt < c.max_retries ? "; reseeded" : "; gave up"));
    if (attempt < c.max_retries) ++slot.retries;
  }
  return slot;
}

inline std::size_t worker_count(std::size_t requested, std::size_t runs) {
  std::size_t k = requested;
  if (k == 0) k = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::min(k, runs);
}

}  // namespace internal

/// Monte Carlo over `runs` paths. Runs are distributed over threads but
/// results are folded in run-index order, so the thread count never changes
/// the output.
inline AggregateResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<internal::RunSlot> slots(c.runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t run = next.fetch_add(1);
      if (run >= c.runs) return;
      try {
        slots[run] = internal::execute_run(c, run);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(c.runs);
      }
    }
  };
  const std::size_t workers = internal::worker_count(c.threads, c.runs);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  AggregateResult out;
  out.config = c;
  out.mean.assign(c.T, 0.0);
  out.std.assign(c.T, 0.0);
  for (const auto& slot : slots) {
    out.retries += slot.retries;
    out.oracle_nonconverged += slot.oracle_nonconverged;
    out.notes.insert(out.notes.end(), slot.notes.begin(), slot.notes.end());
    if (!slot.ok) {
      ++out.failures;
      continue;
    }
    ++out.n_runs;
    for (std::size_t t = 0; t < c.T; ++t) out.mean[t] += slot.relative[t];
  }
  if (out.n_runs > 0) {
    for (double& v : out.mean) v /= static_cast<double>(out.n_runs);
  }
  if (out.n_runs > 1) {
    for (const auto& slot : slots) {
      if (!slot.ok) continue;
      for (std::size_t t = 0; t < c.T; ++t) {
        const double d = slot.relative[t] - out.mean[t];
        out.std[t] += d * d;
      }
    }
    for (double& v : out.std) v = std::sqrt(v / static_cast<double>(out.n_runs - 1));
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline AggregateResult run_adaptive_filtering(ExperimentConfig c) {
  detail::require(c.experiment == Experiment::kAdaptiveFiltering,
                  "run_adaptive_filtering: config is not an adaptive filtering experiment");
  return run_experiment(c);
}

inline AggregateResult run_cvar(ExperimentConfig c) {
  detail::require(c.experiment == Experiment::kCVaR, "run_cvar: config is not a cvar experiment");
  return run_experiment(c);
}

}  // namespace driftbench::harness
