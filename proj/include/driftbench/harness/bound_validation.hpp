#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftbench/diagnostics.hpp"
#include "driftbench/drift.hpp"
#include "driftbench/optim.hpp"
#include "driftbench/random.hpp"
#include "driftbench/regret.hpp"
#include "driftbench/transport.hpp"

namespace driftbench::harness {

/// Raised when a fixture's constants fail their own certification checks.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundValidationSettings {
  std::size_t seeds = 100;
  std::uint64_t master_seed = 7;
  std::size_t horizon = 50;
  std::size_t atoms = 4;
  std::size_t dimension = 2;
  double max_eta = 0.05;
  std::size_t batch = 1;
  double box_half_width = 0.5;
  std::size_t cloud_paths = 32;  // sample paths used to measure K and J
};

struct BoundCase {
  std::string fixture;
  std::uint64_t seed = 0;
  double measured = 0.0;
  double bound = 0.0;
  double reference = std::numeric_limits<double>::quiet_NaN();  // closed form, when known
  bool pass = false;
};

struct BoundValidationReport {
  std::vector<BoundCase> cases;

  std::size_t violations(const std::string& fixture = "") const {
    std::size_t v = 0;
    for (const auto& c : cases) {
      if (!c.pass && (fixture.empty() || c.fixture == fixture)) ++v;
    }
    return v;
  }
  bool pass() const { return violations() == 0; }
};

// ---------------------------------------------------------------------------
// Exact expected SGD trajectory on a path of squared-loss laws
// ---------------------------------------------------------------------------

/// Per-round expectations of online SGD with m-sample minibatches, obtained by
/// propagating the first two moments of the iterate. The update is affine in x
/// with random coefficients, so the recursion is exact.
struct ExpectedSgdRun {
  std::vector<double> expected_gap;    // E[F_t(x_t)] - F_t*, t = 1..T
  std::vector<double> sigma_sq;        // E||g_hat - grad F_t(x_t)||^2, t = 1..T-1
  std::vector<double> loss_shift;      // E[F_{t+1}(x_{t+1}) - F_t(x_{t+1})], t = 1..T-1
  double regret() const {
    double s = 0.0;
    for (double g : expected_gap) s += g;
    return s;
  }
};

inline ExpectedSgdRun expected_sgd_run(const std::vector<PLFixture>& path, const Vector& x1,
                                       double gamma, std::size_t m) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  driftbench::detail::require(!path.empty() && m >= 1, "expected_sgd_run: empty input");
  const auto n = static_cast<Eigen::Index>(x1.size());
  VectorXd mean = Eigen::Map<const VectorXd>(x1.data(), n);
  MatrixXd second = mean * mean.transpose();
  const double inv_m = 1.0 / static_cast<double>(m);

  ExpectedSgdRun out;
  std::vector<QuadraticModel> models;
  for (const auto& f : path) models.push_back(quadratic_model(f.distribution));

  auto expected_value = [](const QuadraticModel& q, const VectorXd& mu, const MatrixXd& s) {
    return (q.A * s).trace() - 2.0 * q.b.dot(mu) + q.c;
  };

  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto& q = models[t];
    out.expected_gap.push_back(expected_value(q, mean, second) - path[t].optimal_value);
    if (t + 1 == path.size()) break;

    // E[g1 g1'] = 4 sum_k p_k E[(u_k'x - d_k)^2] u_k u_k'
    MatrixXd single = MatrixXd::Zero(n, n);
    const auto& p = path[t].distribution;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const auto u_span = regression_input(p.atom(k));
      const Eigen::Map<const VectorXd> u(u_span.data(), n);
      const double d = regression_output(p.atom(k));
      const double r2 = u.dot(second * u) - 2.0 * d * u.dot(mean) + d * d;
      single += 4.0 * p.weight(k) * r2 * u * u.transpose();
    }
    // E[G G'] with G = 2(Ax - b)
    const MatrixXd full = 4.0 * (q.A * second * q.A - q.A * mean * q.b.transpose() -
                                 q.b * mean.transpose() * q.A + q.b * q.b.transpose());
    const MatrixXd grad_outer = (1.0 - inv_m) * full + inv_m * single;
    out.sigma_sq.push_back(inv_m * (single.trace() - full.trace()));

    const MatrixXd cross = 2.0 * (second * q.A - mean * q.b.transpose());  // E[x g']
    const VectorXd next_mean = mean - 2.0 * gamma * (q.A * mean - q.b);
    const MatrixXd next_second =
        second - gamma * (cross + cross.transpose()) + gamma * gamma * grad_outer;
    mean = next_mean;
    second = 0.5 * (next_second + next_second.transpose());

    const auto& qn = models[t + 1];
    out.loss_shift.push_back(expected_value(qn, mean, second) - expected_value(q, mean, second));
  }
  return out;
}

namespace internal {

/// Random drifting path of regression laws with a well-conditioned E[uu'].
inline std::vector<PLFixture> drifting_path(const BoundValidationSettings& s, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> etas(s.horizon - 1);
    for (double& e : etas) e = s.max_eta * unit(rng);
    const auto laws = make_discrete_drift(s.atoms, s.dimension + 1, etas, rng);
    std::vector<PLFixture> path;
    double mu = kInfinity;
    double beta = 0.0;
    bool ok = true;
    for (const auto& p : laws) {
      try {
        path.push_back(make_pl_fixture(p));
      } catch (const std::invalid_argument&) {
        ok = false;
        break;
      }
      mu = std::min(mu, path.back().mu);
      beta = std::max(beta, path.back().beta);
    }
    if (ok && mu >= 0.1 * beta) return path;
  }
  throw CertificationError("could not draw a well-conditioned drifting fixture");
}

inline double path_mu(const std::vector<PLFixture>& path) {
  double mu = kInfinity;
  for (const auto& f : path) mu = std::min(mu, f.mu);
  return mu;
}

inline double path_beta(const std::vector<PLFixture>& path) {
  double beta = 0.0;
  for (const auto& f : path) beta = std::max(beta, f.beta);
  return beta;
}

inline std::vector<double> path_eta(const std::vector<PLFixture>& path) {
  std::vector<double> eta;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    eta.push_back(w1_discrete(path[t].distribution, path[t + 1].distribution).distance);
  }
  return eta;
}

/// Visited iterates of `paths` independent SGD runs with sampled minibatches.
inline std::vector<std::vector<Vector>> sgd_cloud(const std::vector<PLFixture>& path,
                                                  const Vector& x1, double gamma, std::size_t m,
                                                  std::size_t paths, Rng& rng) {
  std::vector<std::vector<Vector>> per_round(path.size());
  for (std::size_t r = 0; r < paths; ++r) {
    OptimizerState state{x1, 1, StepSchedule::constant(gamma, 1)};
    for (std::size_t t = 0; t < path.size(); ++t) {
      per_round[t].push_back(state.x);
      if (t + 1 == path.size()) break;
      const auto& p = path[t].distribution;
      std::discrete_distribution<std::size_t> pick(p.weights().begin(), p.weights().end());
      Vector g(x1.size(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const auto& w = p.atom(pick(rng));
        accumulate_squared_grad(state.x, regression_input(w), regression_output(w),
                                1.0 / static_cast<double>(m), g);
      }
      state = sgd_step(std::move(state), g);
    }
  }
  return per_round;
}

inline void certify(const AssumptionReport& r, const std::string& fixture, std::uint64_t seed) {
  if (!r.pass) {
    throw CertificationError(fixture + " seed " + std::to_string(seed) + ": " + r.id +
                             " certification failed (worst residual " +
                             std::to_string(r.worst_residual) + ")");
  }
}

struct MeasuredShift {
  double K = 0.0;
  std::vector<double> J;
};

/// K as the largest w-Lipschitz modulus and J_t as the largest gradient shift
/// over the supplied points for each consecutive pair of laws.
inline MeasuredShift measure_shift_constants(const std::vector<PLFixture>& path,
                                             const std::vector<std::vector<Vector>>& points) {
  MeasuredShift out;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const auto& p = path[t].distribution;
    const auto& q = path[t + 1].distribution;
    std::vector<Vector> pts = points[t];
    pts.insert(pts.end(), points[t + 1].begin(), points[t + 1].end());
    pts.push_back(path[t].optimizer);
    pts.push_back(path[t + 1].optimizer);
    for (const auto& x : pts) out.K = std::max(out.K, squared_loss_w_lipschitz(x, {&p, &q}));
    out.J.push_back(measured_gradient_shift(p, q, pts));
  }
  return out;
}

}  // namespace internal

/// Zero drift, zero noise, exact gradients on F(x) = ||x - target||^2 (mu = beta = 2).
/// The gap contracts by (1 - 2 mu zeta) per round, so the regret is a geometric sum.
inline BoundCase validate_quadratic_exact(std::uint64_t seed, std::size_t n = 3,
                                          std::size_t horizon = 50, double gamma = 0.125) {
  auto rng = make_rng(seed, 0, 0, Stream::kFixture);
  const Vector target = gaussian_vector(rng, n);
  std::vector<Vector> atoms;
  const double r = std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Vector u(n, 0.0);
      u[i] = sign * r;
      atoms.push_back(regression_atom(u, dot(target, u)));
    }
  }
  const auto fixture = make_pl_fixture(DiscreteDistribution::uniform(atoms));
  const double mu = 2.0;
  const double beta = 2.0;

  RegretLedger ledger;
  OptimizerState state{gaussian_vector(rng, n), 1, StepSchedule::constant(gamma, 1)};
  for (std::size_t t = 1; t <= horizon; ++t) {
    ledger.record(t, fixture.value(state.x), fixture.optimal_value);
    if (t < horizon) state = sgd_step(std::move(state), fixture.grad(state.x));
  }

  BoundInputs in;
  in.mu = mu;
  in.beta = beta;
  in.gamma = gamma;
  in.initial_gap = ledger.gap(1);
  in.eta.assign(horizon - 1, 0.0);
  in.J_values.assign(horizon - 1, 0.0);
  in.sigma_sq.assign(horizon - 1, 0.0);

  const double ratio = 1.0 - 2.0 * mu * zeta(gamma, beta);
  double geometric = 0.0;
  double term = in.initial_gap;
  for (std::size_t t = 1; t <= horizon; ++t) {
    geometric += term;
    term *= ratio;
  }
  BoundCase c{"quadratic_exact", seed, ledger.regret(), theorem1_bound(in), geometric, false};
  c.pass = c.measured <= c.bound && std::abs(c.measured - geometric) <= 1e-9;
  return c;
}

/// Online SGD with sampled minibatches on a drifting discrete path. The
/// measured regret is the exact expected regret; constants are measured on the
/// fixture and certified before the bound is evaluated.
inline BoundCase validate_drifting_sgd(const BoundValidationSettings& s, std::uint64_t seed,
                                       bool variance_form = false) {
  const std::string name = variance_form ? "drifting_sgd_variance" : "drifting_sgd";
  auto rng = make_rng(seed, 0, 0, Stream::kFixture);
  const auto path = internal::drifting_path(s, rng);
  const double mu = internal::path_mu(path);
  const double beta = internal::path_beta(path);
  const double theta_max = std::min(1.0 / beta, 1.0 / (2.0 * mu));
  const double gamma =
      variance_form ? theta_max / std::sqrt(static_cast<double>(s.horizon)) : 0.5 * theta_max;
  const Vector x1(s.dimension, 0.0);

  const auto expected = expected_sgd_run(path, x1, gamma, s.batch);
  const auto cloud = internal::sgd_cloud(path, x1, gamma, s.batch, s.cloud_paths, rng);
  const auto shift = internal::measure_shift_constants(path, cloud);
  const auto eta = internal::path_eta(path);

  for (std::size_t t = 0; t < path.size(); ++t) {
    std::vector<Vector> pts = cloud[t];
    pts.push_back(path[t].optimizer);
    internal::certify(pl_residual(path[t], pts, mu), name, seed);
    if (t + 1 < path.size()) {
      std::vector<Vector> next = cloud[t + 1];
      internal::certify(check_loss_shift(path[t].distribution, path[t + 1].distribution, shift.K,
                                         next, 1e-9),
                        name, seed);
      internal::certify(check_optimal_value_shift(path[t], path[t + 1], shift.K, shift.J[t], mu,
                                                  {path[t].optimizer}),
                        name, seed);
      if (expected.loss_shift[t] > shift.K * eta[t] + 1e-12) {
        throw CertificationError(name + " seed " + std::to_string(seed) +
                                 ": expected loss shift exceeds K eta");
      }
    }
  }

  BoundInputs in;
  in.mu = mu;
  in.beta = beta;
  in.K = shift.K;
  in.gamma = gamma;
  in.initial_gap = expected.expected_gap.front();
  in.eta = eta;
  in.J_values = shift.J;
  in.sigma_sq = expected.sigma_sq;

  double bound = 0.0;
  if (variance_form) {
    double sigma_sq = 0.0;
    for (double v : expected.sigma_sq) sigma_sq = std::max(sigma_sq, v);
    bound = theorem1_variance_bound(in, std::sqrt(sigma_sq), s.horizon);
  } else {
    bound = theorem1_bound(in);
  }
  BoundCase c{name, seed, expected.regret(), bound};
  c.pass = c.measured <= c.bound;
  return c;
}

/// Online proximal gradient descent with exact gradients on a drifting path,
/// constrained to a box that cuts off the unconstrained optima.
inline BoundCase validate_drifting_prox_box(const BoundValidationSettings& s, std::uint64_t seed) {
  const std::string name = "drifting_prox_box";
  auto rng = make_rng(seed, 0, 0, Stream::kFixture);
  const auto path = internal::drifting_path(s, rng);
  const double mu = internal::path_mu(path);
  const double beta = internal::path_beta(path);
  const double gamma = 0.5 / beta;
  const BoxSet box = BoxSet::uniform(s.dimension, -s.box_half_width, s.box_half_width);
  const auto reg = Regularizer::box(box);

  std::vector<PLFixture> boxed = path;  // optimizer and optimal value replaced by the box optimum
  for (auto& f : boxed) {
    const auto opt = box_constrained_optimum(f.distribution, box);
    f.optimizer = opt.x;
    f.optimal_value = opt.value;
  }

  RegretLedger ledger;
  std::vector<std::vector<Vector>> visited(path.size());
  OptimizerState state{Vector(s.dimension, 0.0), 1, StepSchedule::constant(gamma, 1)};
  for (std::size_t t = 0; t < path.size(); ++t) {
    visited[t].push_back(state.x);
    ledger.record(t + 1, boxed[t].value(state.x) + regularizer_value(reg, state.x),
                  boxed[t].optimal_value);
    if (t + 1 < path.size()) state = prox_sgd_step(std::move(state), path[t].grad(state.x), reg);
  }

  const auto shift = internal::measure_shift_constants(boxed, visited);
  const auto eta = internal::path_eta(path);
  for (std::size_t t = 0; t < path.size(); ++t) {
    std::vector<Vector> pts = visited[t];
    pts.push_back(boxed[t].optimizer);
    for (int k = 0; k < 16; ++k) pts.push_back(uniform_point(rng, s.dimension, s.box_half_width));
    internal::certify(proximal_pl_residual(boxed[t].objective(), reg, mu, beta,
                                           boxed[t].optimal_value, pts, 1e-9),
                      name, seed);
    if (t + 1 < path.size()) {
      internal::certify(check_loss_shift(path[t].distribution, path[t + 1].distribution, shift.K,
                                         visited[t + 1], 1e-9),
                        name, seed);
      const double drop = boxed[t].optimal_value - boxed[t + 1].optimal_value;
      if (drop > shift.K * eta[t] + shift.J[t] * shift.J[t] / (2.0 * mu) + 1e-9) {
        throw CertificationError(name + " seed " + std::to_string(seed) +
                                 ": optimal value shift exceeds its bound");
      }
    }
  }

  BoundInputs in;
  in.mu = mu;
  in.beta = beta;
  in.K = shift.K;
  in.gamma = gamma;
  in.initial_gap = ledger.gap(1);
  in.eta = eta;
  in.J_values = shift.J;
  in.sigma_sq.assign(path.size() - 1, 0.0);
  BoundCase c{name, seed, ledger.regret(), theorem2_bound(in)};
  c.pass = c.measured <= c.bound;
  return c;
}

/// All fixtures over `settings.seeds` seeds.
inline BoundValidationReport run_bound_validation(const BoundValidationSettings& s = {}) {
  BoundValidationReport report;
  for (std::size_t k = 0; k < s.seeds; ++k) {
    const std::uint64_t seed = substream_seed(s.master_seed, k, 0, Stream::kFixture);
    report.cases.push_back(validate_quadratic_exact(seed));
    report.cases.push_back(validate_drifting_sgd(s, seed));
    report.cases.push_back(validate_drifting_sgd(s, seed, true));
    report.cases.push_back(validate_drifting_prox_box(s, seed));
  }
  return report;
}

}  // namespace driftbench::harness
