#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "driftbench/diagnostics.hpp"
#include "driftbench/drift.hpp"
#include "driftbench/random.hpp"

namespace driftbench::harness {

struct SuiteSettings {
  std::uint64_t seed = 11;
  std::size_t pl_points = 10000;
  std::size_t drift_fixtures = 1000;
  std::size_t points_per_fixture = 20;
  std::size_t cvar_fixtures = 100;
  std::size_t cvar_atoms = 6;
  std::size_t cvar_points = 400;  // held-out points per fixture
  std::size_t cvar_grid = 201;    // calibration grid per axis
  double cvar_radius = 1.5;       // half-width of the checked box around (theta*, h*)
  double alpha = 0.95;
  double lambda = 0.5;
  double kappa_safety = 0.5;
  double box_half_width = 0.5;
};

/// Folds per-fixture reports of the same check into one.
inline AssumptionReport merge_reports(std::string id, const std::vector<AssumptionReport>& parts,
                                      double tolerance) {
  AssumptionReport out;
  out.id = std::move(id);
  out.tolerance = tolerance;
  out.worst_residual = kInfinity;
  for (const auto& r : parts) {
    out.samples += r.samples;
    out.skipped += r.skipped;
    if (r.samples > 0 && r.worst_residual < out.worst_residual) {
      out.worst_residual = r.worst_residual;
      out.witness = r.witness;
    }
  }
  if (out.samples == 0) out.worst_residual = 0.0;
  out.pass = out.worst_residual >= -tolerance;
  return out;
}

/// Regression law with E[uu'] = I and independent noise of variance s, so the
/// population loss is ||theta - target||^2 + s exactly.
inline DiscreteDistribution isotropic_law(std::span<const double> target, double s) {
  const std::size_t n = target.size();
  const double r = std::sqrt(static_cast<double>(n));
  const double e = std::sqrt(s);
  std::vector<Vector> atoms;
  for (std::size_t i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Vector u(n, 0.0);
      u[i] = sign * r;
      for (double noise : {e, -e}) atoms.push_back(regression_atom(u, dot(target, u) + noise));
    }
  }
  return DiscreteDistribution::uniform(std::move(atoms));
}

namespace internal {

inline std::vector<Vector> cloud(Rng& rng, std::size_t count, std::size_t n, double radius) {
  std::vector<Vector> pts;
  pts.reserve(count);
  for (std::size_t k = 0; k < count; ++k) pts.push_back(uniform_point(rng, n, radius));
  return pts;
}

}  // namespace internal

/// PL and descent-lemma equality on the isotropic quadratic (mu = beta = 2).
inline std::vector<AssumptionReport> isotropic_suite(const SuiteSettings& s) {
  auto rng = make_rng(s.seed, 0, 0, Stream::kFixture);
  const std::size_t n = 5;
  const Vector target = gaussian_vector(rng, n);
  const auto law = isotropic_law(target, 0.5);
  const PLFixture f{law, 2.0, 2.0, 0.5, target};
  auto pts = internal::cloud(rng, s.pl_points, n, 3.0);
  for (auto& x : pts) axpy(1.0, target, x);

  std::vector<AssumptionReport> out;
  auto pl = pl_residual(f, pts, 2.0);
  pl.id = "pl_isotropic_mu2";
  out.push_back(std::move(pl));

  ReportBuilder eq("descent_lemma_equality", kClosedFormTolerance);
  const auto obj = f.objective();
  for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
    const Vector step = subtract(pts[k + 1], pts[k]);
    const double upper = obj.value(pts[k]) + dot(obj.grad(pts[k]), step) + squared_norm(step);
    const double scale = std::max(1.0, std::abs(upper));
    eq.add(-std::abs(upper - obj.value(pts[k + 1])) / scale, pts[k]);
  }
  out.push_back(std::move(eq).finish());
  return out;
}

/// Drift inequalities on random pairs of 4-atom laws in the plane.
inline std::vector<AssumptionReport> drift_suite(const SuiteSettings& s) {
  std::vector<AssumptionReport> loss_shift;
  std::vector<AssumptionReport> value_shift;
  std::vector<AssumptionReport> growth;
  std::vector<AssumptionReport> descent;
  std::vector<AssumptionReport> prox_pl;
  std::size_t degenerate = 0;
  const std::size_t n = 2;
  const BoxSet box = BoxSet::uniform(n, -s.box_half_width, s.box_half_width);
  const auto box_reg = Regularizer::box(box);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t k = 0; k < s.drift_fixtures; ++k) {
    auto rng = make_rng(s.seed, k, 1, Stream::kFixture);
    const double eta = 0.5 * unit(rng);
    const auto laws = make_discrete_drift(4, n + 1, {eta}, rng);
    auto pts = internal::cloud(rng, s.points_per_fixture, n, 3.0);

    double K = 0.0;
    for (const auto& x : pts) K = std::max(K, squared_loss_w_lipschitz(x, {&laws[0], &laws[1]}));
    loss_shift.push_back(check_loss_shift(laws[0], laws[1], K, pts));

    PLFixture f0;
    PLFixture f1;
    try {
      f0 = make_pl_fixture(laws[0]);
      f1 = make_pl_fixture(laws[1]);
    } catch (const std::invalid_argument&) {
      ++degenerate;
      continue;
    }
    std::vector<Vector> with_opt = pts;
    with_opt.push_back(f0.optimizer);
    const double K_opt = std::max(K, squared_loss_w_lipschitz(f0.optimizer, {&laws[0], &laws[1]}));
    const double J = measured_gradient_shift(laws[0], laws[1], with_opt);
    value_shift.push_back(
        check_optimal_value_shift(f0, f1, K_opt, J, std::min(f0.mu, f1.mu), pts));
    growth.push_back(check_quadratic_growth(f0, pts));

    std::vector<std::pair<Vector, Vector>> pairs;
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) pairs.emplace_back(pts[i], pts[i + 1]);
    descent.push_back(check_descent_lemma(f0.objective(), f0.beta, pairs));

    const auto opt = box_constrained_optimum(laws[0], box);
    auto box_pts = internal::cloud(rng, s.points_per_fixture, n, s.box_half_width);
    box_pts.push_back(opt.x);
    prox_pl.push_back(
        proximal_pl_residual(f0.objective(), box_reg, f0.mu, f0.beta, opt.value, box_pts));
  }

  std::vector<AssumptionReport> out;
  out.push_back(merge_reports("loss_shift", loss_shift, kClosedFormTolerance));
  auto vs = merge_reports("optimal_value_shift", value_shift, kClosedFormTolerance);
  vs.skipped += degenerate;
  out.push_back(std::move(vs));
  out.push_back(merge_reports("quadratic_growth", growth, kClosedFormTolerance));
  out.push_back(merge_reports("descent_lemma", descent, kClosedFormTolerance));
  out.push_back(merge_reports("proximal_pl_box", prox_pl, kClosedFormTolerance));
  return out;
}

/// CVaR checks on random regression laws with one input coordinate: the event
/// probability at the optimum stays below alpha, and the PL inequality holds
/// on the region inside a box around the optimum, with kappa measured on a grid
/// over that box and checked on fresh uniform points. The region is unbounded
/// below in h and the PL ratio decays to zero there, hence the box.
inline std::vector<AssumptionReport> cvar_suite(const SuiteSettings& s) {
  detail::require(s.cvar_grid >= 2, "cvar_suite: grid needs at least 2 points per axis");
  ReportBuilder event("cvar_optimum_event_probability", -1e-12);  // strict: alpha - P > 0
  std::vector<AssumptionReport> pl_parts;
  std::size_t no_kappa = 0;
  const std::size_t n = 1;
  const CVaRLossModel model{s.alpha};
  std::uniform_real_distribution<double> offset(-s.cvar_radius, s.cvar_radius);

  for (std::size_t k = 0; k < s.cvar_fixtures; ++k) {
    auto rng = make_rng(s.seed, k, 2, Stream::kFixture);
    std::vector<Vector> atoms;
    for (std::size_t a = 0; a < s.cvar_atoms; ++a) atoms.push_back(gaussian_vector(rng, n + 1));
    const auto law = DiscreteDistribution::uniform(atoms);
    const auto opt = cvar_brute_force_optimum(law, s.alpha);
    const auto ev = event_probability(opt.theta, opt.h, law);
    event.add(s.alpha - ev.probability, opt.theta);

    const double mu = make_pl_fixture(law).mu;
    // PL ratio at in-region, tie-free, off-optimum points; infinity elsewhere.
    auto ratio = [&](const Vector& x) {
      const auto theta = cvar_theta(x);
      const double h = cvar_h(x);
      if (event_probability(theta, h, law).tie) return kInfinity;
      if (!cvar_region_check(theta, h, law, s.alpha, mu, s.lambda, opt.h)) return kInfinity;
      const double gap = population_value(model, x, law) - opt.value;
      if (gap <= 1e-9) return kInfinity;
      return 0.5 * squared_norm(population_grad(model, x, law).grad) / gap;
    };
    const double step = 2.0 * s.cvar_radius / static_cast<double>(s.cvar_grid - 1);
    double inf_ratio = kInfinity;
    for (std::size_t i = 0; i < s.cvar_grid; ++i) {
      for (std::size_t j = 0; j < s.cvar_grid; ++j) {
        const Vector x{opt.theta[0] - s.cvar_radius + step * static_cast<double>(i),
                       opt.h - s.cvar_radius + step * static_cast<double>(j)};
        inf_ratio = std::min(inf_ratio, ratio(x));
      }
    }
    if (!std::isfinite(inf_ratio)) {
      ++no_kappa;
      continue;
    }
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < s.cvar_points; ++i) {
      pts.push_back({opt.theta[0] + offset(rng), opt.h + offset(rng)});
    }
    pl_parts.push_back(cvar_pl_residual(law, s.alpha, s.kappa_safety * inf_ratio,
                                        {opt.theta, opt.h, opt.value}, mu, s.lambda, pts));
  }
  std::vector<AssumptionReport> out;
  out.push_back(std::move(event).finish());
  auto pl = merge_reports("cvar_pl", pl_parts, kOracleTolerance);
  pl.skipped += no_kappa;
  out.push_back(std::move(pl));
  return out;
}

inline std::vector<AssumptionReport> run_assumption_suites(const SuiteSettings& s = {}) {
  std::vector<AssumptionReport> out = isotropic_suite(s);
  for (auto& r : drift_suite(s)) out.push_back(std::move(r));
  for (auto& r : cvar_suite(s)) out.push_back(std::move(r));
  return out;
}

}  // namespace driftbench::harness
