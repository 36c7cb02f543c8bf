#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "driftbench/core.hpp"
#include "driftbench/distribution.hpp"
#include "driftbench/losses.hpp"
#include "driftbench/optim.hpp"
#include "driftbench/random.hpp"
#include "driftbench/transport.hpp"

namespace driftbench {

/// Outcome of checking one inequality of the form `residual >= 0` over a point set.
struct AssumptionReport {
  std::string id;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double worst_residual = kInfinity;
  double tolerance = 1e-9;
  bool pass = true;
  Vector witness;  // point attaining the worst residual
};

/// Default slack for residuals on closed-form fixtures.
inline constexpr double kClosedFormTolerance = 1e-9;
/// Default slack when an optimal value comes from an iterative oracle.
inline constexpr double kOracleTolerance = 1e-6;

class ReportBuilder {
 public:
  ReportBuilder(std::string id, double tolerance) {
    report_.id = std::move(id);
    report_.tolerance = tolerance;
  }

  void add(double residual, std::span<const double> point) {
    ++report_.samples;
    if (residual < report_.worst_residual || report_.witness.empty()) {
      report_.worst_residual = std::min(report_.worst_residual, residual);
      report_.witness.assign(point.begin(), point.end());
    }
  }

  void skip() { ++report_.skipped; }

  AssumptionReport finish() && {
    if (report_.samples == 0) report_.worst_residual = 0.0;
    report_.pass = report_.worst_residual >= -report_.tolerance;
    return std::move(report_);
  }

 private:
  AssumptionReport report_;
};

// ---------------------------------------------------------------------------
// Closed-form quadratic fixtures for the squared loss
// ---------------------------------------------------------------------------

/// F(x) = E[(d - x.u)^2] = x'Ax - 2b'x + c with A = E[uu'], b = E[du], c = E[d^2].
struct QuadraticModel {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;
};

inline QuadraticModel quadratic_model(const DiscreteDistribution& p) {
  const std::size_t n = p.dimension() - 1;
  QuadraticModel q{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto u = regression_input(p.atom(k));
    const double d = regression_output(p.atom(k));
    const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(n));
    q.A += p.weight(k) * uv * uv.transpose();
    q.b += p.weight(k) * d * uv;
    q.c += p.weight(k) * d * d;
  }
  return q;
}

/// Squared-loss population objective with certified constants.
struct PLFixture {
  DiscreteDistribution distribution;
  double mu = 0.0;    // 2 lambda_min(A)
  double beta = 0.0;  // 2 lambda_max(A)
  double optimal_value = 0.0;
  Vector optimizer;

  double value(std::span<const double> x) const {
    return population_value(SquaredLossModel{}, x, distribution);
  }
  Vector grad(std::span<const double> x) const {
    return population_grad(SquaredLossModel{}, x, distribution).grad;
  }
  SmoothObjective objective() const {
    return {[this](std::span<const double> x) { return value(x); },
            [this](std::span<const double> x) { return grad(x); }};
  }
};

inline PLFixture make_pl_fixture(DiscreteDistribution p) {
  const auto q = quadratic_model(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  detail::require(lo > 0.0, "make_pl_fixture: E[uu'] must be positive definite");
  const Eigen::VectorXd xs = q.A.ldlt().solve(q.b);
  PLFixture f;
  f.mu = 2.0 * lo;
  f.beta = 2.0 * hi;
  f.optimizer.assign(xs.data(), xs.data() + xs.size());
  f.distribution = std::move(p);
  f.optimal_value = f.value(f.optimizer);
  return f;
}

/// Exact minimum of the squared-loss objective over a box by enumerating
/// active sets: each coordinate is free, at its lower bound or at its upper
/// bound. The convex QP optimum is the best feasible stationary candidate.
struct BoxedOptimum {
  Vector x;
  double value = kInfinity;
};

inline BoxedOptimum box_constrained_optimum(const DiscreteDistribution& p, const BoxSet& box) {
  const auto q = quadratic_model(p);
  const auto n = static_cast<std::size_t>(q.b.size());
  detail::require(n == box.lower.size(), "box_constrained_optimum: dimension mismatch");
  detail::require(n <= 8, "box_constrained_optimum: dimension too large for enumeration");
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  BoxedOptimum best;
  std::vector<int> state(n);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t c = code;
    std::vector<Eigen::Index> free_idx;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(c % 3);
      c /= 3;
      if (state[i] == 0) free_idx.push_back(static_cast<Eigen::Index>(i));
      if (state[i] == 1) x[static_cast<Eigen::Index>(i)] = box.lower[i];
      if (state[i] == 2) x[static_cast<Eigen::Index>(i)] = box.upper[i];
    }
    if (!free_idx.empty()) {
      const auto f = static_cast<Eigen::Index>(free_idx.size());
      Eigen::MatrixXd Aff(f, f);
      Eigen::VectorXd rhs(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        rhs[a] = q.b[free_idx[a]];
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) {
          bool is_free = std::find(free_idx.begin(), free_idx.end(), j) != free_idx.end();
          if (!is_free) rhs[a] -= q.A(free_idx[a], j) * x[j];
        }
        for (Eigen::Index bb = 0; bb < f; ++bb) Aff(a, bb) = q.A(free_idx[a], free_idx[bb]);
      }
      const Eigen::VectorXd xf = Aff.ldlt().solve(rhs);
      for (Eigen::Index a = 0; a < f; ++a) x[free_idx[a]] = xf[a];
    }
    Vector xv(x.data(), x.data() + x.size());
    if (!box.contains(xv)) continue;
    const double v = population_value(SquaredLossModel{}, xv, p);
    if (v < best.value) best = {std::move(xv), v};
  }
  return best;
}

// ---------------------------------------------------------------------------
// PL and proximal PL
// ---------------------------------------------------------------------------

/// (1/2)||grad F(x)||^2 - mu (F(x) - F*) at each point.
inline AssumptionReport pl_residual(const SmoothObjective& f, double mu, double optimal_value,
                                    const std::vector<Vector>& points,
                                    double tolerance = kClosedFormTolerance) {
  ReportBuilder rb("pl", tolerance);
  for (const auto& x : points) {
    const double gsq = squared_norm(f.grad(x));
    rb.add(0.5 * gsq - mu * (f.value(x) - optimal_value), x);
  }
  return std::move(rb).finish();
}

inline AssumptionReport pl_residual(const PLFixture& fixture, const std::vector<Vector>& points,
                                    double mu, double tolerance = kClosedFormTolerance) {
  return pl_residual(fixture.objective(), mu, fixture.optimal_value, points, tolerance);
}

/// D_R(x, delta) = -2 delta min_y { <g, y - x> + (delta/2)||y - x||^2 + R(y) - R(x) },
/// evaluated at the closed-form minimizer y = prox_{R/delta}(x - g/delta).
inline double proximal_pl_forward(std::span<const double> grad, std::span<const double> x,
                                  double delta, const Regularizer& reg) {
  detail::require(delta > 0.0, "proximal_pl_forward: delta must be positive");
  detail::require_same_size(grad.size(), x.size(), "proximal_pl_forward");
  Vector shifted(x.begin(), x.end());
  axpy(-1.0 / delta, grad, shifted);
  const Vector y = prox(reg, shifted, 1.0 / delta);
  const Vector step = subtract(y, x);
  const double inner = dot(grad, step) + 0.5 * delta * squared_norm(step) +
                       regularizer_value(reg, y) - regularizer_value(reg, x);
  return -2.0 * delta * inner;
}

/// (1/2) D_R(x, beta) - mu (G(x) - G*) with G = F + R.
inline AssumptionReport proximal_pl_residual(const SmoothObjective& f, const Regularizer& reg,
                                             double mu, double beta, double optimal_value,
                                             const std::vector<Vector>& points,
                                             double tolerance = kClosedFormTolerance) {
  ReportBuilder rb("proximal_pl", tolerance);
  for (const auto& x : points) {
    const double g_val = f.value(x) + regularizer_value(reg, x);
    if (!std::isfinite(g_val)) {
      rb.skip();
      continue;
    }
    const double d = proximal_pl_forward(f.grad(x), x, beta, reg);
    rb.add(0.5 * d - mu * (g_val - optimal_value), x);
  }
  return std::move(rb).finish();
}

// ---------------------------------------------------------------------------
// Smoothness, quadratic growth, drift inequalities
// ---------------------------------------------------------------------------

/// F(x) + <grad F(x), y - x> + (beta/2)||y - x||^2 - F(y) for each pair.
inline AssumptionReport check_descent_lemma(const SmoothObjective& f, double beta,
                                            const std::vector<std::pair<Vector, Vector>>& pairs,
                                            double tolerance = kClosedFormTolerance) {
  ReportBuilder rb("descent_lemma", tolerance);
  for (const auto& [x, y] : pairs) {
    const Vector step = subtract(y, x);
    const double upper = f.value(x) + dot(f.grad(x), step) + 0.5 * beta * squared_norm(step);
    const double scale = std::max(1.0, std::abs(upper));
    rb.add((upper - f.value(y)) / scale, x);
  }
  return std::move(rb).finish();
}

/// (mu/2) d^2 <= F(x) - F* <= (beta/2) d^2, d = ||x - x*||; residual is the smaller slack.
inline AssumptionReport check_quadratic_growth(const PLFixture& fixture,
                                               const std::vector<Vector>& points,
                                               double tolerance = kClosedFormTolerance) {
  ReportBuilder rb("quadratic_growth", tolerance);
  for (const auto& x : points) {
    const double dsq = squared_distance(x, fixture.optimizer);
    const double gap = fixture.value(x) - fixture.optimal_value;
    rb.add(std::min(gap - 0.5 * fixture.mu * dsq, 0.5 * fixture.beta * dsq - gap), x);
  }
  return std::move(rb).finish();
}

/// K eta_t - |F_{t+1}(x) - F_t(x)| with eta_t = W1(P_t, P_{t+1}) computed exactly.
inline AssumptionReport check_loss_shift(const DiscreteDistribution& p_t,
                                         const DiscreteDistribution& p_next, double K,
                                         const std::vector<Vector>& points,
                                         double tolerance = kClosedFormTolerance) {
  const double eta = w1_discrete(p_t, p_next).distance;
  ReportBuilder rb("loss_shift", tolerance);
  for (const auto& x : points) {
    const double shift = std::abs(population_value(SquaredLossModel{}, x, p_next) -
                                  population_value(SquaredLossModel{}, x, p_t));
    rb.add(K * eta - shift, x);
  }
  return std::move(rb).finish();
}

/// Largest ||grad F_{t+1}(x) - grad F_t(x)|| over the points.
inline double measured_gradient_shift(const DiscreteDistribution& p_t,
                                      const DiscreteDistribution& p_next,
                                      const std::vector<Vector>& points) {
  double worst = 0.0;
  for (const auto& x : points) {
    const auto g1 = population_grad(SquaredLossModel{}, x, p_t).grad;
    const auto g2 = population_grad(SquaredLossModel{}, x, p_next).grad;
    worst = std::max(worst, distance(g1, g2));
  }
  return worst;
}

/// F_t* - F_{t+1}* <= K eta_t + J^2 / (2 mu), plus the gradient-shift bound
/// ||grad F_{t+1}(x) - grad F_t(x)|| <= J at each supplied point.
inline AssumptionReport check_optimal_value_shift(const PLFixture& at_t, const PLFixture& at_next,
                                                  double K, double J_eta, double mu,
                                                  const std::vector<Vector>& points,
                                                  double tolerance = kClosedFormTolerance) {
  const double eta = w1_discrete(at_t.distribution, at_next.distribution).distance;
  ReportBuilder rb("optimal_value_shift", tolerance);
  const double drop = at_t.optimal_value - at_next.optimal_value;
  rb.add(K * eta + J_eta * J_eta / (2.0 * mu) - drop, at_t.optimizer);
  for (const auto& x : points) {
    const double shift = distance(at_next.grad(x), at_t.grad(x));
    rb.add(J_eta - shift, x);
  }
  return std::move(rb).finish();
}

/// Lipschitz modulus in w of the squared loss at x over segments between atoms
/// of the given laws: 2 max|d - x.u| sqrt(1 + ||x||^2). The residual is convex
/// in w, so its maximum over a segment sits at an endpoint atom.
inline double squared_loss_w_lipschitz(std::span<const double> x,
                                       std::initializer_list<const DiscreteDistribution*> laws) {
  double worst_residual = 0.0;
  for (const auto* p : laws) {
    for (const auto& w : p->atoms()) {
      worst_residual =
          std::max(worst_residual, std::abs(regression_output(w) - dot(x, regression_input(w))));
    }
  }
  return 2.0 * worst_residual * std::sqrt(1.0 + squared_norm(x));
}

// ---------------------------------------------------------------------------
// Empirical constant estimation (all estimates are lower bounds on suprema)
// ---------------------------------------------------------------------------

struct EstimationBudget {
  std::size_t point_pairs = 1000;
  double radius = 3.0;  // points drawn uniformly from [-radius, radius]^n
  std::size_t variance_draws = 2000;
  std::size_t batch_size = 1;
};

inline Vector uniform_point(Rng& rng, std::size_t n, double radius) {
  std::uniform_real_distribution<double> unit(-radius, radius);
  Vector x(n);
  for (double& v : x) v = unit(rng);
  return x;
}

/// max ||grad F(y) - grad F(x)|| / ||y - x|| over sampled pairs.
inline double estimate_smoothness(const SmoothObjective& f, std::size_t n,
                                  const EstimationBudget& budget, Rng& rng) {
  double best = 0.0;
  for (std::size_t k = 0; k < budget.point_pairs; ++k) {
    const Vector x = uniform_point(rng, n, budget.radius);
    const Vector y = uniform_point(rng, n, budget.radius);
    const double dxy = distance(x, y);
    if (dxy == 0.0) continue;
    best = std::max(best, distance(f.grad(y), f.grad(x)) / dxy);
  }
  return best;
}

/// max |L(x, w) - L(x, w')| / ||w - w'|| over sampled x and atom pairs of P.
inline double estimate_w_lipschitz(const DiscreteDistribution& p, std::size_t n,
                                   const EstimationBudget& budget, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  double best = 0.0;
  for (std::size_t k = 0; k < budget.point_pairs; ++k) {
    const Vector x = uniform_point(rng, n, budget.radius);
    const auto& w1 = p.atom(pick(rng));
    const auto& w2 = p.atom(pick(rng));
    const double dw = distance(w1, w2);
    if (dw == 0.0) continue;
    const double l1 = squared_value(x, regression_input(w1), regression_output(w1));
    const double l2 = squared_value(x, regression_input(w2), regression_output(w2));
    best = std::max(best, std::abs(l1 - l2) / dw);
  }
  return best;
}

/// Empirical E||g_hat - grad F(x)||^2 of the m-sample averaged gradient at x.
inline double estimate_gradient_variance(const DiscreteDistribution& p, std::span<const double> x,
                                         std::size_t m, std::size_t draws, Rng& rng) {
  detail::require(m >= 1 && draws >= 1, "estimate_gradient_variance: empty budget");
  const Vector mean = population_grad(SquaredLossModel{}, x, p).grad;
  std::discrete_distribution<std::size_t> pick(p.weights().begin(), p.weights().end());
  double total = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Vector g(x.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& w = p.atom(pick(rng));
      accumulate_squared_grad(x, regression_input(w), regression_output(w),
                              1.0 / static_cast<double>(m), g);
    }
    total += squared_distance(g, mean);
  }
  return total / static_cast<double>(draws);
}

/// Exact E||g_hat - grad F(x)||^2 for the m-sample average: (1/m) Var of one sample.
inline double exact_gradient_variance(const DiscreteDistribution& p, std::span<const double> x,
                                      std::size_t m) {
  const Vector mean = population_grad(SquaredLossModel{}, x, p).grad;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& w = p.atom(k);
    total += p.weight(k) * squared_distance(squared_grad(x, regression_input(w), regression_output(w)), mean);
  }
  return total / static_cast<double>(m);
}

struct ConstantEstimates {
  double beta_hat = 0.0;
  double K_hat = 0.0;
  std::vector<double> J_hat;         // per consecutive pair (length T - 1)
  std::vector<double> sigma_hat_sq;  // per round (length T), at `at`
};

/// Lower estimates of beta, K, J(eta_t) and sigma_t^2 on a path of regression laws.
inline ConstantEstimates estimate_constants(const std::vector<DiscreteDistribution>& path,
                                            std::span<const double> at,
                                            const EstimationBudget& budget, Rng& rng) {
  detail::require(!path.empty(), "estimate_constants: empty path");
  const std::size_t n = path.front().dimension() - 1;
  detail::require_same_size(at.size(), n, "estimate_constants");
  ConstantEstimates out;
  for (const auto& p : path) {
    const PLFixture f{p, 0.0, 0.0, 0.0, {}};
    out.beta_hat = std::max(out.beta_hat, estimate_smoothness(f.objective(), n, budget, rng));
    out.K_hat = std::max(out.K_hat, estimate_w_lipschitz(p, n, budget, rng));
    out.sigma_hat_sq.push_back(
        estimate_gradient_variance(p, at, budget.batch_size, budget.variance_draws, rng));
  }
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    std::vector<Vector> pts;
    for (std::size_t k = 0; k < budget.point_pairs; ++k) pts.push_back(uniform_point(rng, n, budget.radius));
    out.J_hat.push_back(measured_gradient_shift(path[t], path[t + 1], pts));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CVaR region and PL
// ---------------------------------------------------------------------------

struct EventProbability {
  double probability = 0.0;
  bool tie = false;  // some atom has base loss exactly h
};

inline EventProbability event_probability(std::span<const double> theta, double h,
                                          const DiscreteDistribution& p) {
  EventProbability out;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& w = p.atom(k);
    const double excess = squared_value(theta, regression_input(w), regression_output(w)) - h;
    if (excess == 0.0) out.tie = true;
    if (excess > 0.0) out.probability += p.weight(k);
  }
  return out;
}

/// lambda alpha <= P(A(theta, h)) <= alpha + 2 alpha mu (h* - h)
inline bool cvar_region_check(std::span<const double> theta, double h,
                              const DiscreteDistribution& p, double alpha, double mu,
                              double lambda, double h_star) {
  require_alpha(alpha);
  detail::require(lambda > 0.0 && lambda < 1.0, "cvar_region_check: lambda must lie in (0, 1)");
  const double prob = event_probability(theta, h, p).probability;
  return lambda * alpha <= prob && prob <= alpha + 2.0 * alpha * mu * (h_star - h);
}

struct CVaROptimum {
  Vector theta;
  double h = 0.0;
  double value = 0.0;
};

namespace detail {

template <class F>
double golden_section_min(F&& f, double lo, double hi, std::size_t iterations, double* argmin) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (std::size_t k = 0; k < iterations; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = f(x);
  if (argmin) *argmin = x;
  return fx;
}

/// min_h L_alpha(theta, h): CVaR of the base-loss law at theta.
inline CVaRMinimizer cvar_over_h(std::span<const double> theta, const DiscreteDistribution& p,
                                 double alpha) {
  std::vector<double> losses;
  losses.reserve(p.size());
  for (const auto& w : p.atoms()) {
    losses.push_back(squared_value(theta, regression_input(w), regression_output(w)));
  }
  return cvar_minimizer(DiscreteDistribution::on_line(losses, p.weights()), alpha);
}

inline double cvar_profile_min(Vector& theta, std::size_t coord, const DiscreteDistribution& p,
                               double alpha, double radius, std::size_t iterations) {
  if (coord == theta.size()) return cvar_over_h(theta, p, alpha).value;
  auto profile = [&](double v) {
    theta[coord] = v;
    return cvar_profile_min(theta, coord + 1, p, alpha, radius, iterations);
  };
  double arg = 0.0;
  golden_section_min(profile, -radius, radius, iterations, &arg);
  theta[coord] = arg;
  return cvar_profile_min(theta, coord + 1, p, alpha, radius, iterations);
}

}  // namespace detail

/// Minimizer of L_alpha over [-radius, radius]^n x R for a regression law with
/// n <= 3: nested golden-section search on the convex profile in theta, exact
/// enumeration over h. The returned h is the largest minimizing atom value.
inline CVaROptimum cvar_brute_force_optimum(const DiscreteDistribution& p, double alpha,
                                            double radius = 10.0, std::size_t iterations = 90) {
  require_alpha(alpha);
  const std::size_t n = p.dimension() - 1;
  detail::require(n >= 1 && n <= 3, "cvar_brute_force_optimum: supports 1 <= n <= 3");
  Vector theta(n, 0.0);
  detail::cvar_profile_min(theta, 0, p, alpha, radius, iterations);
  const auto inner = detail::cvar_over_h(theta, p, alpha);
  return {theta, inner.h, inner.value};
}

/// (1/2)||grad L_alpha||^2 - kappa (L_alpha - L_alpha*) at points of Delta_t.
/// Points outside the region or with tie atoms are skipped and counted.
inline AssumptionReport cvar_pl_residual(const DiscreteDistribution& p, double alpha, double kappa,
                                         const CVaROptimum& optimum, double mu, double lambda,
                                         const std::vector<Vector>& points,
                                         double tolerance = kOracleTolerance) {
  const CVaRLossModel model{alpha};
  ReportBuilder rb("cvar_pl", tolerance);
  for (const auto& x : points) {
    const auto theta = cvar_theta(x);
    const double h = cvar_h(x);
    const auto ev = event_probability(theta, h, p);
    if (ev.tie || !cvar_region_check(theta, h, p, alpha, mu, lambda, optimum.h)) {
      rb.skip();
      continue;
    }
    const auto g = population_grad(model, x, p);
    const double gap = population_value(model, x, p) - optimum.value;
    rb.add(0.5 * squared_norm(g.grad) - kappa * gap, x);
  }
  return std::move(rb).finish();
}

}  // namespace driftbench
