#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "driftbench/losses.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace driftbench;

namespace {

/// Regression law with k atoms (u in R^n, d scalar).
DiscreteDistribution regression_law(Rng& rng, std::size_t k, std::size_t n) {
  return fixture::random_law(rng, k, n + 1);
}

SampleBatch batch_of(std::initializer_list<const Vector*> atoms) {
  SampleBatch b;
  for (const Vector* w : atoms) {
    const auto u = regression_input(*w);
    b.inputs.emplace_back(u.begin(), u.end());
    b.outputs.push_back(regression_output(*w));
  }
  return b;
}

template <class F>
Vector central_difference(F&& f, Vector x, double step) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

void expect_relative_close(const Vector& a, const Vector& b, double rel) {
  ASSERT_EQ(a.size(), b.size());
  const double scale = std::max(1.0, norm(b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], rel * scale) << "coord " << i;
}

}  // namespace

TEST(SquaredLoss, Examples) {
  EXPECT_EQ(squared_value(Vector{0.0, 0.0}, Vector{3.0, -1.0}, 0.0), 0.0);
  EXPECT_EQ(squared_grad(Vector{0.0, 0.0}, Vector{3.0, -1.0}, 0.0), (Vector{0.0, 0.0}));
  EXPECT_EQ(squared_value(Vector{1.0}, Vector{1.0}, 3.0), 4.0);
  EXPECT_EQ(squared_grad(Vector{1.0}, Vector{1.0}, 3.0), (Vector{-4.0}));
  EXPECT_THROW(squared_value(Vector{1.0}, Vector{1.0, 2.0}, 3.0), std::invalid_argument);
}

TEST(SquaredLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto rng = make_rng(1, k, 0, Stream::kFixture);
    const Vector theta = gaussian_vector(rng, 4);
    const Vector u = gaussian_vector(rng, 4);
    const double d = gaussian_vector(rng, 1)[0];
    const auto fd = central_difference([&](const Vector& x) { return squared_value(x, u, d); },
                                       theta, 1e-5);
    expect_relative_close(squared_grad(theta, u, d), fd, 1e-6);
  }
}

TEST(PopulationSquaredLoss, SingleAtomEqualsPointwise) {
  const Vector w{0.5, -1.0, 2.0};
  const auto p = DiscreteDistribution::point_mass(w);
  const Vector theta{0.3, 0.7};
  EXPECT_EQ(population_value(SquaredLossModel{}, theta, p),
            squared_value(theta, regression_input(w), regression_output(w)));
  EXPECT_EQ(population_grad(SquaredLossModel{}, theta, p).grad,
            squared_grad(theta, regression_input(w), regression_output(w)));
}

TEST(PopulationSquaredLoss, IsotropicFixtureIsDistancePlusNoise) {
  // u in {+e, -e} scaled so E[uu'] = I on the line, noise +-sqrt(s).
  const double target = 0.8;
  const double s = 0.5;
  std::vector<Vector> atoms;
  for (double u : {1.0, -1.0}) {
    for (double nu : {std::sqrt(s), -std::sqrt(s)}) atoms.push_back({u, target * u + nu});
  }
  const auto p = DiscreteDistribution::uniform(atoms);
  for (double theta : {-2.0, 0.0, 0.8, 3.5}) {
    EXPECT_NEAR(population_value(SquaredLossModel{}, Vector{theta}, p),
                (theta - target) * (theta - target) + s, 1e-14);
  }
}

TEST(PopulationSquaredLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    auto rng = make_rng(2, k, 0, Stream::kFixture);
    const auto p = regression_law(rng, 5, 3);
    const Vector theta = gaussian_vector(rng, 3);
    const auto fd = central_difference(
        [&](const Vector& x) { return population_value(SquaredLossModel{}, x, p); }, theta, 1e-5);
    expect_relative_close(population_grad(SquaredLossModel{}, theta, p).grad, fd, 1e-5);
  }
}

TEST(CVaRPointwise, Examples) {
  const Vector theta{0.0};
  const Vector u{1.0};
  EXPECT_EQ(cvar_pointwise(theta, 2.0, u, 1.0, 0.7), 2.0);  // base loss 1 <= h
  EXPECT_EQ(cvar_pointwise(theta, 0.0, u, std::sqrt(2.0), 1.0), squared_value(theta, u, std::sqrt(2.0)));
  EXPECT_EQ(cvar_pointwise(theta, 1.0, u, std::sqrt(3.0), 0.5), 1.0 + 2.0 * (squared_value(theta, u, std::sqrt(3.0)) - 1.0));
  EXPECT_DOUBLE_EQ(cvar_pointwise(theta, 1.0, u, std::sqrt(3.0), 0.5), 5.0);
  EXPECT_THROW(cvar_pointwise(theta, 1.0, u, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(cvar_pointwise(theta, 1.0, u, 1.0, 1.5), std::invalid_argument);
}

TEST(CVaRStochasticGrad, EmptyEventSet) {
  const Vector a{1.0, 0.5};
  const Vector b{-1.0, 0.2};
  const auto g = cvar_stochastic_grad(Vector{0.0}, 10.0, batch_of({&a, &b}), 0.9);
  EXPECT_EQ(g, (Vector{0.0, 1.0}));
}

TEST(CVaRStochasticGrad, FullEventSetWithAlphaOne) {
  const Vector a{1.0, 0.5};
  const Vector b{-1.0, 0.2};
  const auto g = cvar_stochastic_grad(Vector{0.0}, -1.0, batch_of({&a, &b}), 1.0);
  EXPECT_EQ(g.back(), 0.0);
}

TEST(CVaRStochasticGrad, TiesAreOutsideTheEvent) {
  const Vector a{1.0, 2.0};  // base loss 4 at theta 0
  const auto g = cvar_stochastic_grad(Vector{0.0}, 4.0, batch_of({&a}), 0.5);
  EXPECT_EQ(g, (Vector{0.0, 1.0}));
  EXPECT_TRUE(population_grad(CVaRLossModel{0.5}, Vector{0.0, 4.0},
                              DiscreteDistribution::point_mass(a)).tie);
}

TEST(CVaRStochasticGrad, UnbiasedBySampleSpaceEnumeration) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto rng = make_rng(3, k, 0, Stream::kFixture);
    const std::size_t atoms = 1 + k % 8;
    const auto p = regression_law(rng, atoms, 2);
    const Vector theta = gaussian_vector(rng, 2);
    const double h = std::abs(gaussian_vector(rng, 1)[0]);
    const double alpha = 0.3 + 0.7 * static_cast<double>(k % 10) / 10.0;
    Vector x = theta;
    x.push_back(h);
    const auto pop = population_grad(CVaRLossModel{alpha}, x, p);
    ASSERT_FALSE(pop.tie);

    Vector one(3, 0.0);
    Vector two(3, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      axpy(p.weight(i), cvar_stochastic_grad(theta, h, batch_of({&p.atom(i)}), alpha), one);
      for (std::size_t j = 0; j < p.size(); ++j) {
        axpy(p.weight(i) * p.weight(j),
             cvar_stochastic_grad(theta, h, batch_of({&p.atom(i), &p.atom(j)}), alpha), two);
      }
    }
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(one[c], pop.grad[c], 1e-12);
      EXPECT_NEAR(two[c], pop.grad[c], 1e-12);
    }
  }
}

TEST(PopulationCVaR, HPartialIsOneMinusEventMassOverAlpha) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    auto rng = make_rng(4, k, 0, Stream::kFixture);
    const auto p = regression_law(rng, 6, 2);
    Vector x = gaussian_vector(rng, 2);
    x.push_back(0.5);
    double mass = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (squared_value(cvar_theta(x), regression_input(p.atom(i)), regression_output(p.atom(i))) > 0.5) {
        mass += p.weight(i);
      }
    }
    EXPECT_NEAR(population_grad(CVaRLossModel{0.8}, x, p).grad.back(), 1.0 - mass / 0.8, 1e-14);
  }
}

TEST(PopulationCVaR, ThetaBlockMatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    auto rng = make_rng(5, k, 0, Stream::kFixture);
    const auto p = regression_law(rng, 5, 3);
    Vector x = gaussian_vector(rng, 3);
    x.push_back(0.7);
    const CVaRLossModel model{0.6};
    const auto g = population_grad(model, x, p);
    ASSERT_FALSE(g.tie);
    const auto fd = central_difference([&](const Vector& y) { return population_value(model, y, p); },
                                       x, 1e-6);
    // Only the theta block is smooth; h sits at a kink only on ties.
    expect_relative_close(Vector(g.grad.begin(), g.grad.end() - 1), Vector(fd.begin(), fd.end() - 1),
                          1e-5);
  }
}

TEST(VaRCVaR, QuartileExample) {
  const auto z = DiscreteDistribution::uniform_on_line({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(cvar_discrete(z, 0.5), 3.5);
  EXPECT_NEAR(oracle::cvar_by_h_grid({1.0, 2.0, 3.0, 4.0}, {0.25, 0.25, 0.25, 0.25}, 0.5), 3.5, 1e-12);
  EXPECT_EQ(var_discrete(z, 0.5), 2.0);
}

TEST(VaRCVaR, AlphaOneGivesTheMean) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto rng = make_rng(6, k, 0, Stream::kFixture);
    const auto z = fixture::random_law(rng, 1 + k % 9, 1);
    EXPECT_NEAR(cvar_discrete(z, 1.0), z.mean(), 1e-12);
  }
}

TEST(VaRCVaR, MatchesGridOracleAndDominatesTheMean) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto rng = make_rng(7, k, 0, Stream::kFixture);
    const auto z = fixture::random_law(rng, 1 + k % 7, 1);
    std::vector<double> values;
    for (const auto& a : z.atoms()) values.push_back(a[0]);
    double previous = kInfinity;
    for (double alpha : {0.05, 0.2, 0.5, 0.9, 1.0}) {
      const double c = cvar_discrete(z, alpha);
      EXPECT_NEAR(c, oracle::cvar_by_h_grid(values, z.weights(), alpha), 1e-12);
      EXPECT_GE(c, z.mean() - 1e-12);
      EXPECT_LE(c, previous + 1e-12);
      EXPECT_GE(c, var_discrete(z, alpha) - 1e-12);
      previous = c;
    }
  }
}

TEST(Regularizer, Values) {
  const Vector x{2.0, -0.5};
  EXPECT_EQ(regularizer_value(Regularizer::none(), x), 0.0);
  const auto box = Regularizer::box(BoxSet::uniform(2, -5.0, 5.0));
  EXPECT_EQ(regularizer_value(box, x), 0.0);
  EXPECT_EQ(regularizer_value(box, Vector{6.0, 0.0}), kInfinity);
  EXPECT_EQ(regularizer_value(Regularizer::l1(1.0), x), 2.5);
  // Trailing coordinates beyond the extent are free.
  EXPECT_EQ(regularizer_value(Regularizer::l1(1.0, 1), x), 2.0);
  EXPECT_THROW(Regularizer::l1(-1.0), std::invalid_argument);
  EXPECT_THROW(Regularizer::box(BoxSet{{1.0}, {0.0}}), std::invalid_argument);
}

TEST(Prox, Examples) {
  EXPECT_EQ(prox(Regularizer::l1(1.0), Vector{2.0, -0.5, 0.0}, 1.0), (Vector{1.0, 0.0, 0.0}));
  EXPECT_EQ(prox(Regularizer::l1(0.5), Vector{2.0, -3.0}, 2.0), (Vector{1.0, -2.0}));
  const auto box = Regularizer::box(BoxSet::uniform(2, -5.0, 5.0));
  EXPECT_EQ(prox(box, Vector{7.0, -6.0}, 0.3), (Vector{5.0, -5.0}));
  EXPECT_EQ(prox(box, Vector{1.0, -2.0}, 0.3), (Vector{1.0, -2.0}));
  EXPECT_EQ(prox(Regularizer::none(), Vector{7.0, -6.0}, 0.3), (Vector{7.0, -6.0}));
  EXPECT_EQ(prox(Regularizer::l1(1.0, 1), Vector{2.0, 2.0}, 1.0), (Vector{1.0, 2.0}));
  EXPECT_THROW(prox(box, Vector{1.0, 1.0}, 0.0), std::invalid_argument);
}

TEST(Prox, NonexpansiveOnRandomPairs) {
  const std::vector<Regularizer> regs{Regularizer::none(),
                                      Regularizer::box(BoxSet::uniform(4, -1.0, 0.5)),
                                      Regularizer::l1(0.7)};
  auto rng = make_rng(8, 0, 0, Stream::kFixture);
  std::uniform_real_distribution<double> gamma(0.01, 3.0);
  for (int k = 0; k < 2000; ++k) {
    const Vector x = gaussian_vector(rng, 4, 4.0);
    const Vector y = gaussian_vector(rng, 4, 4.0);
    const double g = gamma(rng);
    for (const auto& r : regs) {
      EXPECT_LE(distance(prox(r, x, g), prox(r, y, g)), distance(x, y) + 1e-12);
    }
  }
}

TEST(Prox, SoftThresholdOptimality) {
  auto rng = make_rng(9, 0, 0, Stream::kFixture);
  std::uniform_real_distribution<double> tau(0.0, 2.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = gaussian_vector(rng, 1, 4.0)[0];
    const double t = tau(rng);
    const double y = soft_threshold(x, t);
    // 0 in y - x + t * d|y|
    if (y != 0.0) {
      EXPECT_NEAR(y - x + t * (y > 0.0 ? 1.0 : -1.0), 0.0, 1e-12);
    } else {
      EXPECT_LE(std::abs(x), t + 1e-12);
    }
  }
}
