#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftbench/driftbench.hpp"

using namespace driftbench;
using namespace driftbench::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Experiment e, Variant v, ScheduleKind k) {
  auto c = defaults(e);
  c.variant = v;
  c.schedule = k;
  c.T = 40;
  c.runs = 6;
  c.threads = 3;
  c.evaluation_samples = 200;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("driftbench_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, ParsesNamesAndAliases) {
  EXPECT_EQ(parse_experiment("filtering"), Experiment::kAdaptiveFiltering);
  EXPECT_EQ(parse_experiment("cvar"), Experiment::kCVaR);
  EXPECT_EQ(parse_variant("box"), Variant::kBoxConstrained);
  EXPECT_EQ(parse_variant("l1_regularized"), Variant::kL1Regularized);
  EXPECT_EQ(parse_schedule("decaying"), ScheduleKind::kDecayingOverSqrtRound);
  EXPECT_THROW(parse_variant("ridge"), std::invalid_argument);
  EXPECT_THROW(parse_schedule("cosine"), std::invalid_argument);
}

TEST(Config, PublishedDefaults) {
  const auto f = defaults(Experiment::kAdaptiveFiltering);
  EXPECT_EQ(f.T, 500u);
  EXPECT_EQ(f.n, 5u);
  EXPECT_EQ(f.m, 5u);
  EXPECT_EQ(f.runs, 100u);
  EXPECT_EQ(f.step_c, 0.01);
  EXPECT_EQ(f.oracle.objective_tolerance, 1e-6);
  const auto c = defaults(Experiment::kCVaR);
  EXPECT_EQ(c.m, 20u);
  EXPECT_EQ(c.alpha, 0.95);
  EXPECT_EQ(c.oracle.objective_tolerance, 0.01);
  EXPECT_EQ(c.oracle.oracle_sample_count, 100u);
}

TEST(Config, Validation) {
  auto c = defaults(Experiment::kAdaptiveFiltering);
  c.T = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = defaults(Experiment::kCVaR);
  c.alpha = 0.0;
  EXPECT_THROW(run_experiment(c), std::invalid_argument);
  EXPECT_THROW(run_cvar(defaults(Experiment::kAdaptiveFiltering)), std::invalid_argument);
}

TEST(FilteringPath, FirstRoundGapIsDistanceFromOriginToStart) {
  const auto c = small(Experiment::kAdaptiveFiltering, Variant::kUnconstrained,
                       ScheduleKind::kConstantOverSqrtHorizon);
  const auto rec = simulate_path(c, c.seed, 0);
  ASSERT_EQ(rec.ledger.rounds(), c.T);
  EXPECT_DOUBLE_EQ(rec.ledger.realized()[0], 5.0 + 0.5);
  EXPECT_DOUBLE_EQ(rec.ledger.optimal()[0], 0.5);
}

TEST(FilteringPath, L1OptimalValueComesFromTheOracle) {
  const auto c = small(Experiment::kAdaptiveFiltering, Variant::kL1Regularized,
                       ScheduleKind::kConstantOverSqrtHorizon);
  const auto rec = simulate_path(c, c.seed, 0);
  // Target e: soft threshold by 1/2 gives 0.5 e, value 5 * 0.25 + 0.5 + 5 * 0.5.
  EXPECT_NEAR(rec.ledger.optimal()[0], 1.25 + 0.5 + 2.5, 1e-4);
  EXPECT_DOUBLE_EQ(rec.ledger.realized()[0], 5.0 + 0.5);
}

TEST(Paths, ProxRouteWithNoneRegularizerIsBitIdentical) {
  for (auto e : {Experiment::kAdaptiveFiltering, Experiment::kCVaR}) {
    const auto c = small(e, Variant::kUnconstrained, ScheduleKind::kDecayingOverSqrtRound);
    const auto sgd = simulate_path(c, c.seed, 2, {true, false});
    const auto prox = simulate_path(c, c.seed, 2, {true, true});
    EXPECT_EQ(sgd.iterates, prox.iterates);
    EXPECT_EQ(sgd.ledger.realized(), prox.ledger.realized());
  }
}

TEST(Paths, CVaRIterateCarriesTheThreshold) {
  const auto c = small(Experiment::kCVaR, Variant::kL1Regularized, ScheduleKind::kConstantOverSqrtHorizon);
  const auto rec = simulate_path(c, c.seed, 0, {true, false});
  ASSERT_EQ(rec.iterates.size(), c.T);
  EXPECT_EQ(rec.iterates.front().size(), c.n + 1);
  EXPECT_NE(rec.iterates.back().back(), 0.0);  // h moves (it is not penalized)
}

TEST(RunExperiment, ThreadCountDoesNotChangeTheResult) {
  for (auto e : {Experiment::kAdaptiveFiltering, Experiment::kCVaR}) {
    auto c = small(e, Variant::kL1Regularized, ScheduleKind::kConstantOverSqrtHorizon);
    c.threads = 1;
    const auto serial = run_experiment(c);
    c.threads = 4;
    const auto parallel = run_experiment(c);
    EXPECT_EQ(csv_text(serial), csv_text(parallel));
    EXPECT_EQ(serial.mean, parallel.mean);
    EXPECT_EQ(serial.std, parallel.std);
  }
}

TEST(RunExperiment, RelativeRegretStartsAtOne) {
  const auto r = run_experiment(
      small(Experiment::kAdaptiveFiltering, Variant::kBoxConstrained, ScheduleKind::kDecayingOverSqrtRound));
  EXPECT_EQ(r.mean.front(), 1.0);
  EXPECT_EQ(r.std.front(), 0.0);
  EXPECT_EQ(r.n_runs, 6u);
  EXPECT_EQ(r.failures, 0u);
}

TEST(RunExperiment, DivergentRunsAreRetriedThenReportedAsFailures) {
  auto c = small(Experiment::kAdaptiveFiltering, Variant::kUnconstrained, ScheduleKind::kDecayingOverSqrtRound);
  c.step_c = 50.0;
  c.max_retries = 2;
  c.runs = 3;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.failures, 3u);
  EXPECT_EQ(r.n_runs, 0u);
  EXPECT_EQ(r.retries, 6u);
  EXPECT_EQ(r.notes.size(), 9u);
  EXPECT_NE(r.notes.back().find("gave up"), std::string::npos);
}

TEST(Export, CsvShapeAndDeterminism) {
  auto c = small(Experiment::kAdaptiveFiltering, Variant::kUnconstrained, ScheduleKind::kConstantOverSqrtHorizon);
  c.T = 3;
  const auto dir = scratch("csv");
  export_csv(run_experiment(c), dir / "a.csv");
  export_csv(run_experiment(c), dir / "b.csv");
  const auto text = slurp(dir / "a.csv");
  EXPECT_EQ(text, slurp(dir / "b.csv"));
  std::istringstream lines(text);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "t,mean_relative_regret,std_relative_regret,n_runs");
  EXPECT_EQ(rows[1], "1,1,0,6");
  fs::remove_all(dir);
}

TEST(Export, SummaryEchoesConfigAndCounts) {
  const auto r = run_experiment(
      small(Experiment::kAdaptiveFiltering, Variant::kUnconstrained, ScheduleKind::kConstantOverSqrtHorizon));
  const auto text = summary_text(r);
  for (const char* key : {"experiment=adaptive_filtering", "variant=unconstrained", "seed=20240101",
                          "schedule=constant", "failures=0", "retries=0", "wall_seconds="}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
}

TEST(Export, IoFailureNamesThePath) {
  const auto dir = scratch("io");
  fs::create_directories(dir);
  std::ofstream(dir / "blocker") << "x";
  AggregateResult r;
  try {
    export_csv(r, dir / "blocker" / "out.csv");
    FAIL() << "expected ExportError";
  } catch (const ExportError& e) {
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Export, ReportsTables) {
  AssumptionReport ok{"a", 3, 1, 0.5, 1e-9, true, {}};
  AssumptionReport bad{"b", 2, 0, -0.25, 1e-9, false, {1.0, 2.0}};
  EXPECT_EQ(reports_csv_text({ok, bad}),
            "id,samples,skipped,worst_residual,tolerance,pass\na,3,1,0.5,1e-09,1\nb,2,0,-0.25,1e-09,0\n");
  const auto text = reports_summary_text({ok, bad});
  EXPECT_NE(text.find("PASS a"), std::string::npos);
  EXPECT_NE(text.find("FAIL b"), std::string::npos);
  EXPECT_NE(text.find("witness=(1, 2)"), std::string::npos);
}

TEST(ExpectedSgdRun, MatchesMonteCarloAverage) {
  BoundValidationSettings s;
  s.horizon = 15;
  auto rng = make_rng(3, 0, 0, Stream::kFixture);
  const auto path = harness::internal::drifting_path(s, rng);
  const double gamma = 0.5 * std::min(1.0 / harness::internal::path_beta(path),
                                      1.0 / (2.0 * harness::internal::path_mu(path)));
  const Vector x1{0.7, -0.4};
  const std::size_t m = 2;
  const auto exact = expected_sgd_run(path, x1, gamma, m);
  ASSERT_EQ(exact.expected_gap.size(), path.size());
  ASSERT_EQ(exact.sigma_sq.size(), path.size() - 1);
  EXPECT_NEAR(exact.sigma_sq[0], exact_gradient_variance(path[0].distribution, x1, m), 1e-12);

  const std::size_t draws = 40000;
  std::vector<double> mc(path.size(), 0.0);
  for (std::size_t k = 0; k < draws; ++k) {
    Vector x = x1;
    for (std::size_t t = 0; t < path.size(); ++t) {
      mc[t] += path[t].value(x) - path[t].optimal_value;
      if (t + 1 == path.size()) break;
      const auto& p = path[t].distribution;
      std::discrete_distribution<std::size_t> pick(p.weights().begin(), p.weights().end());
      Vector g(x.size(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const auto& w = p.atom(pick(rng));
        accumulate_squared_grad(x, regression_input(w), regression_output(w), 1.0 / m, g);
      }
      axpy(-gamma, g, x);
    }
  }
  for (std::size_t t = 0; t < path.size(); ++t) {
    const double avg = mc[t] / static_cast<double>(draws);
    EXPECT_NEAR(avg, exact.expected_gap[t], 0.03 * std::max(exact.expected_gap[t], 0.05)) << "t " << t;
  }
}

TEST(BoundValidation, QuadraticFixtureFollowsTheGeometricSeries) {
  const auto c = validate_quadratic_exact(42);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.measured, c.reference, 1e-9);
  EXPECT_LE(c.measured, c.bound);
}

TEST(BoundValidation, SmallRunHasNoViolations) {
  BoundValidationSettings s;
  s.seeds = 5;
  const auto report = run_bound_validation(s);
  EXPECT_EQ(report.cases.size(), 20u);
  EXPECT_TRUE(report.pass());
  for (const auto& c : report.cases) EXPECT_GE(c.measured, 0.0) << c.fixture;
}

TEST(AssumptionSuites, SmallRunPasses) {
  SuiteSettings s;
  s.pl_points = 500;
  s.drift_fixtures = 30;
  s.cvar_fixtures = 10;
  s.cvar_points = 200;
  for (const auto& r : run_assumption_suites(s)) {
    EXPECT_TRUE(r.pass) << r.id << " worst " << r.worst_residual;
    EXPECT_GT(r.samples, 0u) << r.id;
  }
}
