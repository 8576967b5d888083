// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "gridsched/stochastic_analysis.hpp"
#include "oracles.hpp"

using namespace gridsched;
using namespace gridsched::stochastic;

namespace {

const CostFunction kSquare = CostFunction::quadratic(1, 0, 0);
const CostFunction kIdentity = CostFunction::linear(1.0);

StochasticParams unit(double lambda, double s) { return {lambda, s, 1.0, {{1.0, 1.0}}}; }

}  // namespace

TEST(StochasticParams, Validation) {
  EXPECT_NO_THROW(unit(1, 1).validate());
  EXPECT_THROW(unit(0, 1).validate(), InvalidArgument);
  EXPECT_THROW(unit(1, 0).validate(), InvalidArgument);
  StochasticParams p = unit(1, 1);
  p.deadline_rate = 0.0;
  EXPECT_NO_THROW(p.validate());
  p.power_dist = {{1, 0.5}, {1, 0.5}};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.power_dist = {{1, 0.5}, {2, 0.4}};
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(MmInfPmf, Examples) {
  EXPECT_NEAR(mm_inf_pmf(unit(2, 1), 0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(mm_inf_pmf(unit(2, 1), 0), 0.1353353, 1e-7);
  EXPECT_NEAR(mm_inf_pmf(unit(2, 2), 1), 0.3678794, 1e-7);
  EXPECT_GT(mm_inf_pmf(unit(500, 1), 500), 0.0);  // no overflow in log space
  for (double mean : {0.3, 4.0, 37.5, 400.0}) {
    const auto d = poisson_distribution(mean);
    double total = 0.0;
    for (double q : d.probabilities) total += q;
    EXPECT_NEAR(total, 1.0, 1e-12) << mean;
    EXPECT_LE(d.truncation_error, 1e-12);
    EXPECT_LE(1.0 - total, d.truncation_error + 1e-15);
    for (unsigned i = 0; i < 30 && i < d.probabilities.size(); ++i) {
      EXPECT_NEAR(d.probabilities[i], oracle::poisson_pmf(mean, i), 1e-13);
    }
  }
}

TEST(DefaultPolicyCost, Examples) {
  EXPECT_NEAR(default_policy_cost(unit(4, 1), kSquare), 20.0, 1e-9);
  EXPECT_NEAR(default_policy_cost(unit(4, 1), kIdentity), 4.0, 1e-9);
  EXPECT_NEAR(default_policy_cost(unit(30, 2), CostFunction::constant(3.5)), 3.5, 1e-9 * 3.5);
  StochasticParams two = unit(1, 1);
  two.power_dist = {{2.0, 1.0}};
  EXPECT_THROW(default_policy_cost(two, kSquare), InvalidArgument);
}

TEST(DefaultPolicyCost, PiecewiseMatchesDirectSum) {
  const auto c = CostFunction::piecewise({{1, 0}, {4, -15}});
  double direct = 0.0;
  for (unsigned i = 0; i < 200; ++i) direct += oracle::poisson_pmf(6, i) * c(i);
  EXPECT_NEAR(default_policy_cost(unit(12, 2), c), direct, 1e-9 * direct);
}

TEST(CompoundDefaultCost, Examples) {
  const auto single = compound_default_cost(unit(4, 1), kSquare);
  EXPECT_TRUE(single.exact);
  EXPECT_NEAR(single.value, default_policy_cost(unit(4, 1), kSquare), 1e-9);

  StochasticParams two = unit(1, 1);
  two.power_dist = {{2.0, 1.0}};
  EXPECT_NEAR(compound_default_cost(two, kIdentity).value, 2.0, 1e-9);

  StochasticParams mix = unit(2, 1);
  mix.power_dist = {{1.0, 0.5}, {3.0, 0.5}};
  const auto m = compound_default_cost(mix, kIdentity);
  EXPECT_TRUE(m.exact);
  EXPECT_NEAR(m.value, 4.0, 4e-9);
}

TEST(CompoundDefaultCost, SecondMomentOfCompoundPoisson) {
  // Var(sum p_k N_k) = sum p_k^2 lambda w_k / s, so E[P^2] = Var + mean^2.
  StochasticParams mix = unit(3, 1.5);
  mix.power_dist = {{0.5, 0.2}, {1.25, 0.5}, {2.0, 0.3}};
  double mean = 0.0, var = 0.0;
  for (const auto& c : mix.power_dist) {
    mean += c.power * mix.lambda * c.weight / mix.service;
    var += c.power * c.power * mix.lambda * c.weight / mix.service;
  }
  const auto r = compound_default_cost(mix, kSquare);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.quantum, 0.25, 1e-12);
  EXPECT_NEAR(r.value, var + mean * mean, 1e-9 * (var + mean * mean));
  EXPECT_NEAR(compound_default_cost(mix, kIdentity).value, mix.offered_power(), 1e-9 * mix.offered_power());
}

TEST(CompoundDefaultCost, MonteCarloFallbackForIncommensurablePowers) {
  StochasticParams mix = unit(2, 1);
  mix.power_dist = {{1.0, 0.5}, {std::sqrt(2.0), 0.5}};
  const auto r = compound_default_cost(mix, kIdentity);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.standard_error, 0.0);
  EXPECT_NEAR(r.value, mix.offered_power(), 5 * r.standard_error);
  EXPECT_EQ(compound_default_cost(mix, kIdentity).value, r.value);  // seeded
}

TEST(PowerWeightedMixture, ReducesToDefaultForUnitPower) {
  EXPECT_NEAR(power_weighted_mixture_cost(unit(4, 1), kSquare), 20.0, 1e-9);
  StochasticParams mix = unit(2, 1);
  mix.power_dist = {{1.0, 0.5}, {3.0, 0.5}};
  double direct = 0.0;
  for (unsigned i = 0; i < 100; ++i)
    for (const auto& c : mix.power_dist) direct += oracle::poisson_pmf(2, i) * c.power * kSquare(i * c.weight);
  EXPECT_NEAR(power_weighted_mixture_cost(mix, kSquare), direct, 1e-9 * direct);
}

TEST(UniversalLowerBound, Examples) {
  EXPECT_NEAR(universal_lower_bound(unit(3, 1), kSquare), 9.0, 1e-12);
  EXPECT_NEAR(universal_lower_bound(unit(8, 1), kSquare), 64.0, 1e-12);
  EXPECT_EQ(universal_lower_bound(unit(8, 1), CostFunction::constant(2)), 2.0);
}

TEST(MmcStationary, Examples) {
  const auto mm1 = mmc_stationary(0.5, 1, 1);
  EXPECT_NEAR(mm1.probabilities[0], 0.5, 1e-12);
  for (unsigned i = 0; i < 20; ++i) EXPECT_NEAR(mm1.probabilities[i], 0.5 * std::pow(0.5, i), 1e-14);

  const auto wide = mmc_stationary(8, 1, 48);
  const auto pois = poisson_distribution(8);
  double tv = 0.0;
  for (std::size_t i = 0; i < std::max(wide.probabilities.size(), pois.probabilities.size()); ++i) {
    const double a = i < wide.probabilities.size() ? wide.probabilities[i] : 0.0;
    const double b = i < pois.probabilities.size() ? pois.probabilities[i] : 0.0;
    tv += 0.5 * std::abs(a - b);
  }
  EXPECT_LT(tv, 1e-6);

  for (unsigned c : {1u, 3u, 9u, 20u}) {
    const auto d = mmc_stationary(0.9 * c, 1, c);
    double total = 0.0;
    for (double q : d.probabilities) total += q;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_THROW(mmc_stationary(2, 1, 2), UnstableQueue);
}

TEST(ErlangC, SingleServerIsRho) {
  EXPECT_NEAR(erlang_c(0.3, 1, 1), 0.3, 1e-14);
  // c = 2, a = 1: C = (a^2/2 * 2/(2-1)) / (1 + a + a^2/2 * 2) = 1/3
  EXPECT_NEAR(erlang_c(1, 1, 2), 1.0 / 3.0, 1e-14);
}

TEST(MmcPowerCost, Examples) {
  EXPECT_NEAR(mmc_power_cost(0.5, 1, 1, kIdentity), 0.5, 1e-12);
  for (unsigned c : {2u, 5u, 9u, 30u}) {
    EXPECT_NEAR(mmc_power_cost(0.8 * c, 1.0, c, kIdentity), 0.8 * c, 1e-9 * c);
    EXPECT_NEAR(mmc_power_cost(0.8 * c, 1.0, c, CostFunction::constant(4)), 4.0, 1e-12);
    EXPECT_NEAR(mmc_power_cost(0.8 * c, 1.0, c, kSquare), oracle::mmc_cost_direct(0.8 * c, 1.0, c, kSquare),
                1e-9 * c * c);
  }
}

TEST(MmcPowerCost, SitsBetweenBoundAndDefault) {
  const std::vector<CostFunction> costs{kSquare, kIdentity, CostFunction::piecewise({{1, 0}, {5, -30}}),
                                        CostFunction::quadratic(0.2, 1, 3)};
  for (const auto& c : costs) {
    for (double lambda : {0.7, 3.0, 8.0, 15.5}) {
      const auto p = unit(lambda, 1);
      const auto lo = universal_lower_bound(p, c);
      const auto hi = default_policy_cost(p, c);
      for (unsigned extra = 1; extra < 12; ++extra) {
        const auto servers = static_cast<std::uint64_t>(std::ceil(lambda)) + extra;
        const double v = mmc_power_cost(lambda, 1, servers, c);
        EXPECT_LE(lo, v + 1e-9);
        EXPECT_LE(v, hi + 1e-9);
      }
    }
  }
}

TEST(CrAsymptotics, Examples) {
  const std::vector<double> eps{1.0, 40.0, 0.25};
  const auto rows = cr_asymptotics(unit(8, 1), eps, kSquare);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].servers, 9u);
  EXPECT_NEAR(rows[0].gap, mmc_power_cost(8, 1, 9, kSquare) - 64.0, 1e-9);
  EXPECT_GT(rows[0].gap, 0.0);
  EXPECT_EQ(rows[1].servers, 48u);
  EXPECT_NEAR(rows[1].gap, 8.0, 0.08);
  EXPECT_EQ(rows[2].servers, 9u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.lower_bound, 64.0);
    EXPECT_TRUE(r.stable);
  }

  StochasticParams p = unit(8, 1);
  // Lost to rounding: lambda/s + 1e-20 == lambda/s, so c = 8 and rho = 1.
  const std::vector<double> tight{1e-20};
  const auto flagged = cr_asymptotics(p, tight, kSquare);
  EXPECT_FALSE(flagged[0].stable);
  EXPECT_TRUE(std::isnan(flagged[0].mmc_cost));
  const std::vector<double> negative{0.0};
  EXPECT_THROW(cr_asymptotics(p, negative, kSquare), InvalidArgument);
}
