#include <algorithm>
#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oversight/core_model.hpp"
#include "test_support.hpp"

namespace oversight {
namespace {

TEST(GrossUtility, NoChallengeEnvironmentIsIdentity) {
  UtilityEnvironment env;
  env.c_in = -5.0;
  env.c_out = -0.3;
  EXPECT_EQ(gross_utility(env, Action::CallOut, State::In), 0.0);
  EXPECT_EQ(gross_utility(env, Action::CallIn, State::Out), 0.0);
  EXPECT_EQ(gross_utility(env, Action::CallIn, State::In), 1.0);
  EXPECT_EQ(gross_utility(env, Action::CallOut, State::Out), 1.0);
}

TEST(GrossUtility, ChallengedMistakeCarriesPenalty) {
  const auto env = UtilityEnvironment::with_challenges(0.427, 0.410, -2.003, -0.088);
  // 0.427 * (1 - 2.003)
  EXPECT_NEAR(gross_utility(env, Action::CallOut, State::In), -0.428281, 1e-12);
  EXPECT_NEAR(gross_utility(env, Action::CallIn, State::Out), 0.410 * 0.912, 1e-12);
  EXPECT_EQ(gross_utility(env, Action::CallIn, State::In), 1.0);
}

TEST(UtilityEnvironment, RejectsBadRatesButAllowsPositivePenalty) {
  EXPECT_THROW(UtilityEnvironment::with_challenges(1.2, 0.1, 0, 0), InvalidInput);
  EXPECT_THROW(UtilityEnvironment::with_challenges(0.1, -0.1, 0, 0), InvalidInput);
  const auto env = UtilityEnvironment::with_challenges(0.3, 0.3, 0.5, -0.1);
  EXPECT_TRUE(env.has_positive_penalty());
}

TEST(Beliefs, RejectOffSimplex) {
  EXPECT_THROW(Prior(0.6, 0.5), InvalidInput);
  EXPECT_THROW(Posterior(-0.1, 1.1), InvalidInput);
  EXPECT_NO_THROW(Prior(0.3, 0.7));
}

TEST(AttentionCost, RequiresPositiveKappas) {
  EXPECT_THROW(AttentionCost::make(0.0, 1.0), InvalidInput);
  EXPECT_THROW(AttentionCost::make(1.0, -2.0), InvalidInput);
  EXPECT_THROW(AttentionCost::make(1.0, INFINITY), InvalidInput);
}

TEST(ValidateStructure, SymmetricCaseHasZeroResiduals) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(0.8, 0.2), 0.5}, {Posterior(0.2, 0.8), 0.5}}};
  const auto d = validate_information_structure(s);
  EXPECT_NEAR(d.weight_sum_residual, 0.0, 1e-15);
  EXPECT_NEAR(d.bayes_residual_in, 0.0, 1e-15);
  EXPECT_TRUE(d.simplex_violations.empty());
  EXPECT_TRUE(d.consistent());
}

TEST(ValidateStructure, ReportsBayesResidual) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(0.8, 0.2), 0.7}, {Posterior(0.2, 0.8), 0.3}}};
  const auto d = validate_information_structure(s);
  // 0.7 * 0.8 + 0.3 * 0.2 - 0.5
  EXPECT_NEAR(d.bayes_residual_in, 0.12, 1e-12);
  EXPECT_NEAR(d.bayes_residual_out, -0.12, 1e-12);
  EXPECT_FALSE(d.consistent());
  EXPECT_THROW(shannon_cost(s, AttentionCost{1, 1}), InvalidInput);
}

TEST(ValidateStructure, MatchedWeightsForAsymmetricPrior) {
  // Weights solved from Bayes plausibility for prior in-share 0.468.
  const double hi = 0.8, lo = 0.2, mu = 0.468;
  const double w = (mu - lo) / (hi - lo);
  InformationStructure s{Prior::from_in(mu),
                         {{Posterior::from_in(hi), w}, {Posterior::from_in(lo), 1.0 - w}}};
  const auto d = validate_information_structure(s);
  EXPECT_NEAR(d.bayes_residual_in, 0.0, 1e-15);
  EXPECT_TRUE(d.consistent());
}

TEST(ValidateStructure, FlagsNegativeWeights) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(0.8, 0.2), 1.5}, {Posterior(0.9, 0.1), -0.5}}};
  const auto d = validate_information_structure(s);
  ASSERT_EQ(d.simplex_violations.size(), 1u);
  EXPECT_EQ(d.simplex_violations[0], 1u);
}

TEST(ShannonCost, UninformativeIsZero) {
  InformationStructure s{Prior(0.3, 0.7), {{Posterior(0.3, 0.7), 1.0}}};
  EXPECT_EQ(shannon_cost(s, AttentionCost{2.0, 0.5}), 0.0);
}

TEST(ShannonCost, FullInformationAtUniformPrior) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(1.0, 0.0), 0.5}, {Posterior(0.0, 1.0), 0.5}}};
  EXPECT_NEAR(shannon_cost(s, AttentionCost{1, 1}), std::log(2.0), 1e-15);
  EXPECT_NEAR(shannon_cost(s, AttentionCost{3, 3}), 3.0 * std::log(2.0), 1e-14);
}

TEST(ShannonCost, DirectSummationValue) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(0.599, 0.401), 0.5}, {Posterior(0.401, 0.599), 0.5}}};
  // Frozen from direct summation of sum pi g ln g - sum mu ln mu.
  EXPECT_NEAR(shannon_cost(s, AttentionCost{1, 1}), 0.019732131198896607, 1e-15);
}

TEST(ShannonCost, PropertiesOnRandomStructures) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> kd(0.1, 5.0);
  for (int i = 0; i < 500; ++i) {
    auto s = testing::random_structure(rng);
    const double k = kd(rng);
    const double cost = shannon_cost(s, AttentionCost{k, k});
    EXPECT_GE(cost, -1e-14);
    EXPECT_NEAR(cost, k * testing::mutual_information(s), 1e-12);
    // Order of posteriors is irrelevant, also for asymmetric kappas.
    const AttentionCost asym{k, kd(rng)};
    const double before = shannon_cost(s, asym);
    std::reverse(s.posteriors.begin(), s.posteriors.end());
    EXPECT_NEAR(shannon_cost(s, asym), before, 1e-13);
  }
}

TEST(ShannonCost, ZeroOnlyWhenPosteriorsEqualPrior) {
  InformationStructure s{Prior(0.5, 0.5),
                         {{Posterior(0.5 + 1e-3, 0.5 - 1e-3), 0.5},
                          {Posterior(0.5 - 1e-3, 0.5 + 1e-3), 0.5}}};
  EXPECT_GT(shannon_cost(s, AttentionCost{1, 1}), 0.0);
}

TEST(StructureJson, TwelveSignificantDigitsAndRoundTrip) {
  InformationStructure s{Prior::from_in(1.0 / 3.0),
                         {{Posterior::from_in(2.0 / 3.0), 0.5}, {Posterior::from_in(0.0), 0.5}}};
  const auto j = to_json(s);
  EXPECT_EQ(j["prior"]["p_in"].get<double>(), 0.333333333333);
  EXPECT_EQ(j["posteriors"].size(), 2u);
  const auto back = information_structure_from_json(j);
  EXPECT_NEAR(back.posteriors[0].posterior.p_in(), 2.0 / 3.0, 1e-12);
  EXPECT_THROW(information_structure_from_json(nlohmann::json::object()), DataFormatError);
}

}  // namespace
}  // namespace oversight
