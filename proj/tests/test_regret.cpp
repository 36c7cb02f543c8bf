#include <gtest/gtest.h>

#include <random>

#include "driftbench/random.hpp"
#include "driftbench/regret.hpp"

using namespace driftbench;

namespace {

RegretLedger ledger_with_gaps(const std::vector<double>& gaps) {
  RegretLedger l;
  for (std::size_t t = 0; t < gaps.size(); ++t) l.record(t + 1, 2.0 + gaps[t], 2.0);
  return l;
}

BoundInputs unit_inputs(std::size_t rounds) {
  BoundInputs in;
  in.mu = 1.0;
  in.beta = 1.0;
  in.gamma = 0.4;
  in.initial_gap = 1.0;
  in.eta.assign(rounds, 0.0);
  in.J_values.assign(rounds, 0.0);
  in.sigma_sq.assign(rounds, 0.0);
  return in;
}

}  // namespace

TEST(RegretLedger, Examples) {
  EXPECT_EQ(ledger_with_gaps({0.0, 0.0, 0.0}).regret(3), 0.0);
  const auto l = ledger_with_gaps({1.0, 0.5, 0.25});
  EXPECT_DOUBLE_EQ(l.regret(3), 1.75);
  EXPECT_EQ(l.regret(1), l.gap(1));
  EXPECT_EQ(l.regret(0), 0.0);
  EXPECT_EQ(l.rounds(), 3u);
}

TEST(RegretLedger, OutOfOrderRecordingIsUsageError) {
  RegretLedger l;
  EXPECT_THROW(l.record(2, 1.0, 0.0), UsageError);
  l.record(1, 1.0, 0.0);
  EXPECT_THROW(l.record(1, 1.0, 0.0), UsageError);
  EXPECT_THROW(l.regret(2), UsageError);
}

TEST(RegretLedger, NegativeGapsAreKeptSigned) {
  const auto l = ledger_with_gaps({1.0, -0.5});
  EXPECT_DOUBLE_EQ(l.gap(2), -0.5);
  EXPECT_DOUBLE_EQ(l.regret(2), 0.5);
}

TEST(RelativeRegret, Examples) {
  EXPECT_EQ(ledger_with_gaps({0.3}).relative_regret(1), 1.0);
  const auto flat = ledger_with_gaps({0.7, 0.7, 0.7, 0.7});
  for (std::size_t t = 1; t <= 4; ++t) EXPECT_DOUBLE_EQ(flat.relative_regret(t), 1.0);
  EXPECT_DOUBLE_EQ(ledger_with_gaps({1.0, 0.5}).relative_regret(2), 0.75);
  EXPECT_THROW(ledger_with_gaps({0.0, 1.0}).relative_regret(2), std::domain_error);
}

TEST(RelativeRegret, FirstEntryIsOneForAnyNonzeroGap) {
  auto rng = make_rng(1, 0, 0, Stream::kFixture);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> gaps(10);
    for (double& g : gaps) g = normal(rng);
    if (gaps[0] == 0.0) continue;
    EXPECT_EQ(ledger_with_gaps(gaps).relative_regret_series().front(), 1.0);
  }
}

TEST(Theorem1Bound, Examples) {
  EXPECT_NEAR(zeta(0.4, 1.0), 0.32, 1e-15);
  EXPECT_NEAR(theorem1_bound(unit_inputs(5)), 1.5625, 1e-12);
  auto zero = unit_inputs(5);
  zero.initial_gap = 0.0;
  EXPECT_EQ(theorem1_bound(zero), 0.0);
}

TEST(Theorem1Bound, StepOutsideRangeIsPreconditionError) {
  auto in = unit_inputs(3);
  in.gamma = 0.5;  // min(1/beta, 1/(2 mu)) = 0.5, open interval
  EXPECT_THROW(theorem1_bound(in), PreconditionError);
  // Relaxed range: only zeta > 0 is needed.
  EXPECT_NO_THROW(theorem1_bound(in, BoundForm::kSimplified, false));
  in.gamma = 2.0;  // zeta = 0
  EXPECT_THROW(theorem1_bound(in, BoundForm::kSimplified, false), PreconditionError);
}

TEST(Theorem1Bound, TermByTerm) {
  BoundInputs in = unit_inputs(2);
  in.K = 2.0;
  in.eta = {0.1, 0.2};
  in.J_values = {0.5, 1.0};
  in.sigma_sq = {0.3, 0.1};
  const double z = 0.32;
  const double expected = 1.0 / (2.0 * z) + 2.0 / z * 0.3 + (0.25 + 1.0) / (4.0 * z) + 0.4 / 2.0 * 0.4;
  EXPECT_NEAR(theorem1_bound(in), expected, 1e-12);
  const double tight = 1.0 / (2.0 * z) + 2.0 / z * 0.3 + (0.25 + 1.0) / (4.0 * z) +
                       0.16 / (4.0 * z) * 0.4;
  EXPECT_NEAR(theorem1_bound(in, BoundForm::kUnsimplified), tight, 1e-12);
}

TEST(Theorem1Bound, UnsimplifiedNeverExceedsSimplified) {
  auto rng = make_rng(2, 0, 0, Stream::kFixture);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    BoundInputs in;
    in.mu = 0.1 + unit(rng);
    in.beta = in.mu + 3.0 * unit(rng);
    in.gamma = (0.01 + 0.98 * unit(rng)) * std::min(1.0 / in.beta, 1.0 / (2.0 * in.mu));
    in.K = unit(rng);
    in.initial_gap = unit(rng);
    for (int t = 0; t < 5; ++t) {
      in.eta.push_back(unit(rng));
      in.J_values.push_back(unit(rng));
      in.sigma_sq.push_back(unit(rng));
    }
    EXPECT_LE(theorem1_bound(in, BoundForm::kUnsimplified), theorem1_bound(in) * (1.0 + 1e-12));
  }
}

TEST(Bounds, NondecreasingInEachInput) {
  auto rng = make_rng(3, 0, 0, Stream::kFixture);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    BoundInputs in;
    in.mu = 0.2 + unit(rng);
    in.beta = in.mu + unit(rng);
    in.gamma = 0.5 * std::min(1.0 / in.beta, 1.0 / (2.0 * in.mu));
    in.K = unit(rng);
    in.kappa = 0.1 + unit(rng);
    in.C_constant = unit(rng);
    in.initial_gap = unit(rng);
    for (int t = 0; t < 4; ++t) {
      in.eta.push_back(unit(rng));
      in.J_values.push_back(unit(rng));
      in.sigma_sq.push_back(unit(rng));
    }
    auto all = [&](const BoundInputs& b) {
      return std::vector<double>{theorem1_bound(b), theorem1_bound(b, BoundForm::kUnsimplified),
                                 theorem1_variance_bound(b, std::sqrt(b.sigma_sq[0]), 5),
                                 theorem2_bound(b), corollary_cvar_bound(b, 0.3)};
    };
    const auto base = all(in);
    std::vector<BoundInputs> bumped(4, in);
    bumped[0].initial_gap += 0.5;
    bumped[1].eta[2] += 0.5;
    bumped[2].J_values[1] += 0.5;
    bumped[3].sigma_sq[0] += 0.5;
    for (const auto& b : bumped) {
      const auto v = all(b);
      for (std::size_t i = 0; i < v.size(); ++i) EXPECT_GE(v[i], base[i]);
    }
  }
}

TEST(Theorem1VarianceBound, Examples) {
  auto in = unit_inputs(3);
  in.initial_gap = 0.0;
  EXPECT_EQ(theorem1_variance_bound(in, 0.0, 4), 0.0);
  in.initial_gap = 1.0;
  EXPECT_DOUBLE_EQ(theorem1_variance_bound(in, 0.0, 4), 4.0);
  // sigma enters M1 as sigma^2 / (2 mu).
  EXPECT_DOUBLE_EQ(theorem1_variance_bound(in, 1.0, 4), 4.0 + 0.5 * 2.0);
}

TEST(Theorem2Bound, Examples) {
  auto in = unit_inputs(3);
  in.gamma = 0.5;
  EXPECT_DOUBLE_EQ(theorem2_bound(in), 1.0);
  in.initial_gap = 0.0;
  EXPECT_EQ(theorem2_bound(in), 0.0);
  in.gamma = 1.0;
  EXPECT_THROW(theorem2_bound(in), PreconditionError);
}

TEST(CorollaryCVaRBound, Examples) {
  BoundInputs in = unit_inputs(2);
  in.kappa = 1.0;
  in.initial_gap = 0.0;
  in.K = 1.0;
  in.C_constant = 4.0;
  in.eta = {1.0, 1.0};
  EXPECT_DOUBLE_EQ(corollary_cvar_bound(in, 1.0), 4.0);

  BoundInputs quiet = unit_inputs(2);
  quiet.kappa = 0.5;
  EXPECT_DOUBLE_EQ(corollary_cvar_bound(quiet, 0.25), 1.0 / (2.0 * 0.5 * 0.25));
  EXPECT_THROW(corollary_cvar_bound(quiet, 0.0), std::invalid_argument);
  quiet.kappa = 0.0;
  EXPECT_THROW(corollary_cvar_bound(quiet, 0.25), std::invalid_argument);
}
