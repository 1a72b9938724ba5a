#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oversight/attention_solver.hpp"
#include "oversight/revealed_preference.hpp"
#include "oversight/structural_estimation.hpp"
#include "test_support.hpp"

namespace oversight {
namespace {

TEST(IlrPosteriors, SymmetricLogisticSolution) {
  for (double k : {0.3, 1.0, 2.5}) {
    const auto p = solve_ilr_posteriors({}, AttentionCost{k, k});
    const double expected = std::exp(1.0 / k) / (1.0 + std::exp(1.0 / k));
    EXPECT_NEAR(p.call_in.p_in(), expected, 1e-14);
    EXPECT_NEAR(p.call_out.p_out(), expected, 1e-14);
  }
}

TEST(IlrPosteriors, AsymmetricCostsWithoutChallenges) {
  const auto p = solve_ilr_posteriors({}, AttentionCost{2.492, 0.906});
  // Odds ratios e^(1/2.492) and e^(1/0.906).
  EXPECT_NEAR(p.call_in.p_in() / p.call_out.p_in(), 1.4937, 5e-4);
  EXPECT_NEAR(p.call_out.p_out() / p.call_in.p_out(), 3.0157, 5e-4);
  // Frozen closed-form values, checked by substitution in ilr_residuals.
  EXPECT_NEAR(p.call_in.p_in(), 0.8591048657475953, 1e-13);
  EXPECT_NEAR(p.call_out.p_in(), 0.5751362011149234, 1e-13);
  const auto r = ilr_residuals({}, AttentionCost{2.492, 0.906}, p);
  EXPECT_LE(std::abs(r.in), 1e-12);
  EXPECT_LE(std::abs(r.out), 1e-12);
}

TEST(IlrPosteriors, WithChallengesUsesShiftedAdvantages) {
  const auto env = UtilityEnvironment::with_challenges(0.427, 0.410, -2.003, -0.088);
  const AttentionCost cost{2.492, 0.906};
  const auto p = solve_ilr_posteriors(env, cost);
  EXPECT_NEAR(std::log(p.call_in.p_in() / p.call_out.p_in()), 1.428281 / 2.492, 1e-12);
  EXPECT_NEAR(std::log(p.call_out.p_out() / p.call_in.p_out()), 0.62608 / 0.906, 1e-12);
  EXPECT_NEAR(p.call_in.p_in(), 0.6953630515578367, 1e-13);
  EXPECT_NEAR(p.call_out.p_in(), 0.3920101047242993, 1e-13);
}

TEST(IlrPosteriors, RejectsReversedIncentivesAndBadCosts) {
  // eta (1 + c) >= 1 makes a challenged mistake at least as good as a correct call.
  const auto env = UtilityEnvironment::with_challenges(1.0, 0.2, 0.0, -1.0);
  EXPECT_THROW(solve_ilr_posteriors(env, AttentionCost{1, 1}), InvalidInput);
  EXPECT_THROW(solve_ilr_posteriors({}, AttentionCost{0.0, 1.0}), InvalidInput);
}

TEST(IlrPosteriors, ExtremeCostsStayOnSimplex) {
  const auto cheap = solve_ilr_posteriors({}, AttentionCost{1e-3, 1e-3});
  EXPECT_NEAR(cheap.call_in.p_in(), 1.0, 1e-12);
  EXPECT_NEAR(cheap.call_out.p_in(), 0.0, 1e-12);
  const auto dear = solve_ilr_posteriors({}, AttentionCost{1e6, 1e6});
  EXPECT_NEAR(dear.call_in.p_in(), 0.5, 1e-6);
  EXPECT_GT(dear.call_in.p_in(), dear.call_out.p_in());
}

TEST(OptimalStructure, SymmetricInteriorHasHalfWeight) {
  const auto s = solve_optimal_structure({}, AttentionCost{1, 1}, Prior(0.5, 0.5));
  EXPECT_EQ(s.regime, Regime::Interior);
  EXPECT_NEAR(s.weight_call_in, 0.5, 1e-14);
  EXPECT_TRUE(validate_information_structure(s.structure).consistent());
}

TEST(OptimalStructure, PriorOutsideSpanIsCorner) {
  // Span is [1 - e^.5/(1+e^.5), e^.5/(1+e^.5)] = [0.378, 0.622].
  const auto s = solve_optimal_structure({}, AttentionCost{2, 2}, Prior(0.999, 0.001));
  EXPECT_EQ(s.regime, Regime::CornerAllIn);
  EXPECT_EQ(s.structure.posteriors.size(), 1u);
  EXPECT_EQ(shannon_cost(s.structure, AttentionCost{2, 2}), 0.0);
  EXPECT_NEAR(s.net_utility, 0.999, 1e-14);
  const auto o = brute_force_oracle({}, AttentionCost{2, 2}, Prior(0.999, 0.001), 400);
  EXPECT_LE(o.net_utility, s.net_utility + 1e-12);
  EXPECT_EQ(o.regime, Regime::CornerAllIn);
}

TEST(OptimalStructure, BoundaryPriorResolvesToInterior) {
  const auto pair = solve_ilr_posteriors({}, AttentionCost{1, 1});
  const auto s = solve_optimal_structure({}, AttentionCost{1, 1},
                                         Prior::from_in(pair.call_in.p_in()));
  EXPECT_EQ(s.regime, Regime::Interior);
  EXPECT_NEAR(s.weight_call_in, 1.0, 1e-12);
}

TEST(OptimalStructure, PosteriorsIndependentOfPrior) {
  const auto env = UtilityEnvironment::with_challenges(0.3, 0.5, -1.2, -0.4);
  const AttentionCost cost{0.8, 1.3};
  const auto ref = solve_ilr_posteriors(env, cost);
  int interior = 0;
  for (int i = 1; i <= 10; ++i) {
    const double mu = ref.call_out.p_in() + (ref.call_in.p_in() - ref.call_out.p_in()) * i / 11.0;
    const auto s = solve_optimal_structure(env, cost, Prior::from_in(mu));
    ASSERT_EQ(s.regime, Regime::Interior);
    ++interior;
    EXPECT_EQ(s.posterior_call_in, ref.call_in);
    EXPECT_EQ(s.posterior_call_out, ref.call_out);
  }
  EXPECT_EQ(interior, 10);
}

// Costs (2.492, 0.906) with in-share 0.489: the prior lies below both ILR
// posteriors, so the ILR solver reports a corner. With kappa_in != kappa_out
// the ILR pair is not the exact optimum and the oracle finds an informative
// structure that does strictly better.
TEST(OptimalStructure, TableCostsAtPostPeriodPriorIsCornerUnderIlr) {
  const AttentionCost cost{2.492, 0.906};
  const Prior prior(0.489, 0.511);
  const auto s = solve_optimal_structure({}, cost, prior);
  EXPECT_EQ(s.regime, Regime::CornerAllOut);
  const auto o = brute_force_oracle({}, cost, prior, 400);
  EXPECT_EQ(o.regime, Regime::Interior);
  EXPECT_GT(o.net_utility, s.net_utility);
  const auto exact = solve_exact_structure({}, cost, prior);
  EXPECT_EQ(exact.regime, Regime::Interior);
  EXPECT_NEAR(exact.net_utility, o.net_utility, 1e-7);
}

TEST(OptimalStructure, InteriorExampleMatchesOracleWithCommonKappa) {
  const AttentionCost cost{1.5, 1.5};
  const Prior prior(0.489, 0.511);
  const auto s = solve_optimal_structure({}, cost, prior);
  ASSERT_EQ(s.regime, Regime::Interior);
  const auto o = brute_force_oracle({}, cost, prior, 1000);
  EXPECT_NEAR(s.net_utility, o.net_utility, 1e-6);
  const auto rp = revealed_posteriors(s.choice_probs);
  EXPECT_NEAR(rp.in_given_call_in, s.posterior_call_in.p_in(), 1e-12);
  EXPECT_NEAR(rp.out_given_call_out, s.posterior_call_out.p_out(), 1e-12);
}

TEST(Oracle, RejectsCoarseGrid) {
  EXPECT_THROW(brute_force_oracle({}, AttentionCost{1, 1}, Prior(0.5, 0.5), 50), InvalidInput);
}

TEST(Oracle, InfiniteCostIsUninformative) {
  const auto o = brute_force_oracle({}, AttentionCost{1e9, 1e9}, Prior(0.6, 0.4), 200);
  EXPECT_EQ(o.regime, Regime::CornerAllIn);
  EXPECT_NEAR(o.net_utility, 0.6, 1e-9);
}

TEST(Oracle, MatchesSolverOnRandomCommonKappaInstances) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 20; ++i) {
    const auto inst = testing::random_instance(rng, true);
    const auto s = solve_optimal_structure(inst.env, inst.cost, inst.prior);
    const auto o = brute_force_oracle(inst.env, inst.cost, inst.prior, 500);
    EXPECT_GE(s.net_utility, o.net_utility - 1e-6);
    EXPECT_NEAR(s.net_utility, o.net_utility, 1e-6);
    EXPECT_TRUE(validate_information_structure(s.structure).consistent());
  }
}

TEST(ExactAsymmetric, AgreesWithIlrForCommonKappa) {
  const auto env = UtilityEnvironment::with_challenges(0.4, 0.2, -1.0, -0.5);
  const auto a = solve_ilr_posteriors(env, AttentionCost{0.7, 0.7});
  const auto b = solve_exact_asymmetric_posteriors(env, AttentionCost{0.7, 0.7});
  EXPECT_NEAR(a.call_in.p_in(), b.call_in.p_in(), 1e-12);
  EXPECT_NEAR(a.call_out.p_in(), b.call_out.p_in(), 1e-12);
}

TEST(ExactAsymmetric, MatchesOracleWhereIlrFallsShort) {
  std::mt19937_64 rng(99);
  int gaps = 0;
  for (int i = 0; i < 15; ++i) {
    const auto inst = testing::random_instance(rng, false);
    const auto exact = solve_exact_structure(inst.env, inst.cost, inst.prior);
    const auto ilr = solve_optimal_structure(inst.env, inst.cost, inst.prior);
    const auto o = brute_force_oracle(inst.env, inst.cost, inst.prior, 500);
    EXPECT_NEAR(exact.net_utility, o.net_utility, 1e-6);
    EXPECT_LE(ilr.net_utility, o.net_utility + 1e-9);
    if (o.net_utility - ilr.net_utility > 1e-6) ++gaps;
  }
  EXPECT_GT(gaps, 0);
}

TEST(PredictedChoiceData, InteriorProduct) {
  SolverSolution s;
  s.weight_call_in = 0.5;
  s.posterior_call_in = Posterior(0.8, 0.2);
  s.posterior_call_out = Posterior(0.2, 0.8);
  const auto d = predicted_choice_data(s);
  EXPECT_NEAR(d(Action::CallIn, State::In), 0.40, 1e-15);
  EXPECT_NEAR(d(Action::CallOut, State::In), 0.10, 1e-15);
}

TEST(PredictedChoiceData, CornerPutsAllMassOnOneCall) {
  const auto s = solve_optimal_structure({}, AttentionCost{50, 50}, Prior(0.9, 0.1));
  ASSERT_EQ(s.regime, Regime::CornerAllIn);
  EXPECT_NEAR(s.choice_probs(Action::CallIn, State::In), 0.9, 1e-15);
  EXPECT_EQ(s.choice_probs.action_marginal(Action::CallOut), 0.0);
}

TEST(SolverProperties, RandomInstances) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto inst = testing::random_instance(rng, true);
    const auto s = solve_optimal_structure(inst.env, inst.cost, inst.prior);
    const auto& d = s.choice_probs;
    double sum = 0.0;
    for (const auto& row : d.joint)
      for (double p : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(d.state_marginal(State::In), inst.prior.p_in(), 1e-12);
    EXPECT_TRUE(validate_information_structure(s.structure).consistent());
    EXPECT_TRUE(nias_check(d, inst.env).pass);
    if (s.regime == Regime::Interior) {
      const auto r = ilr_residuals(inst.env, inst.cost,
                                   {s.posterior_call_in, s.posterior_call_out});
      EXPECT_LE(std::abs(r.in), 1e-10);
      EXPECT_LE(std::abs(r.out), 1e-10);
    } else {
      EXPECT_EQ(shannon_cost(s.structure, inst.cost), 0.0);
    }
  }
}

// A larger overturn penalty on out-calls of in-balls makes that mistake rarer.
// Only for a common kappa: with unequal kappas the ILR pair is not optimal and
// the comparative static can fail (see ExactAsymmetric tests).
TEST(SolverProperties, TypeTwoRateFallsWithItsPenalty) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    auto inst = testing::random_instance(rng, true);
    if (inst.env.eta_in < 0.05) continue;
    double prev = 2.0;
    for (double c = 0.0; c >= -3.0; c -= 0.25) {
      auto env = inst.env;
      env.c_in = c;
      if (correct_call_advantage(env, State::Out) <= 0.0) break;
      const auto s = solve_optimal_structure(env, inst.cost, inst.prior);
      const double rate = s.choice_probs(Action::CallOut, State::In) / inst.prior.p_in();
      EXPECT_LE(rate, prev + 1e-12);
      prev = rate;
    }
  }
}

}  // namespace
}  // namespace oversight
