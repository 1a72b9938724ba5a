#pragma once

// Decision-theoretic primitives for a line umpire: two states (ball in/out),
// two calls, a challenge-augmented payoff matrix, Bayes-consistent
// information structures and the state-asymmetric Shannon attention cost.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "oversight/errors.hpp"

namespace oversight {

enum class State { In = 0, Out = 1 };
enum class Action { CallIn = 0, CallOut = 1 };

inline constexpr std::array<State, 2> kStates{State::In, State::Out};
inline constexpr std::array<Action, 2> kActions{Action::CallIn, Action::CallOut};

constexpr std::size_t index(State s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index(Action a) { return static_cast<std::size_t>(a); }

/// The action that is correct in state `s`.
constexpr Action matching_action(State s) {
  return s == State::In ? Action::CallIn : Action::CallOut;
}
constexpr bool is_correct(Action a, State s) { return a == matching_action(s); }

inline const char* to_string(State s) { return s == State::In ? "in" : "out"; }
inline const char* to_string(Action a) { return a == Action::CallIn ? "in" : "out"; }

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kAggregateTolerance = 1e-10;

/// Gross payoffs with challenges. A correct call is worth `correct_payoff`.
/// An unchallenged mistake is worth `incorrect_unchallenged_payoff`; a
/// challenged (overturned) mistake is worth `correct_payoff + c` for the
/// state in which it happened.
struct UtilityEnvironment {
  double eta_in = 0.0;
  double eta_out = 0.0;
  double c_in = 0.0;
  double c_out = 0.0;
  double correct_payoff = 1.0;
  double incorrect_unchallenged_payoff = 0.0;

  static UtilityEnvironment no_oversight() { return {}; }

  static UtilityEnvironment with_challenges(double eta_in, double eta_out,
                                            double c_in, double c_out) {
    UtilityEnvironment env;
    env.eta_in = eta_in;
    env.eta_out = eta_out;
    env.c_in = c_in;
    env.c_out = c_out;
    env.validate();
    return env;
  }

  void validate() const {
    auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
    if (!prob(eta_in) || !prob(eta_out)) {
      throw InvalidInput(fmt::format("challenge rates must lie in [0,1], got ({}, {})",
                                     eta_in, eta_out));
    }
    if (!std::isfinite(c_in) || !std::isfinite(c_out) || !std::isfinite(correct_payoff) ||
        !std::isfinite(incorrect_unchallenged_payoff)) {
      throw InvalidInput("utility environment contains non-finite values");
    }
  }

  bool has_challenges() const { return eta_in > 0.0 || eta_out > 0.0; }

  /// Penalties above zero are admissible for bound exploration but contradict
  /// the model's sign restriction; callers surface this as a diagnostic.
  bool has_positive_penalty() const { return c_in > 0.0 || c_out > 0.0; }
};

/// Expected payoff of a mistake in state `s` once challenges are taken into
/// account.
inline double mistake_payoff(const UtilityEnvironment& env, State s) {
  const double eta = s == State::In ? env.eta_in : env.eta_out;
  const double c = s == State::In ? env.c_in : env.c_out;
  return (1.0 - eta) * env.incorrect_unchallenged_payoff + eta * (env.correct_payoff + c);
}

inline double gross_utility(const UtilityEnvironment& env, Action a, State s) {
  return is_correct(a, s) ? env.correct_payoff : mistake_payoff(env, s);
}

/// Utility advantage of the correct call in state `s`.
inline double correct_call_advantage(const UtilityEnvironment& env, State s) {
  return env.correct_payoff - mistake_payoff(env, s);
}

namespace detail {

template <class Tag>
class BinaryDistribution {
 public:
  BinaryDistribution() = default;

  BinaryDistribution(double p_in, double p_out) : p_in_(p_in), p_out_(p_out) {
    if (!std::isfinite(p_in) || !std::isfinite(p_out) || p_in < -kSimplexTolerance ||
        p_out < -kSimplexTolerance || p_in > 1.0 + kSimplexTolerance ||
        p_out > 1.0 + kSimplexTolerance ||
        std::abs(p_in + p_out - 1.0) > kSimplexTolerance) {
      throw InvalidInput(fmt::format("{} ({}, {}) is not a probability vector", Tag::kName,
                                     p_in, p_out));
    }
  }

  static BinaryDistribution from_in(double p_in) { return {p_in, 1.0 - p_in}; }

  double p_in() const { return p_in_; }
  double p_out() const { return p_out_; }
  double operator[](State s) const { return s == State::In ? p_in_ : p_out_; }

  friend bool operator==(const BinaryDistribution&, const BinaryDistribution&) = default;

 private:
  double p_in_ = 0.5;
  double p_out_ = 0.5;
};

struct PriorTag {
  static constexpr const char* kName = "prior";
};
struct PosteriorTag {
  static constexpr const char* kName = "posterior";
};

}  // namespace detail

using Prior = detail::BinaryDistribution<detail::PriorTag>;
using Posterior = detail::BinaryDistribution<detail::PosteriorTag>;

inline Posterior as_posterior(const Prior& p) { return {p.p_in(), p.p_out()}; }

struct AttentionCost {
  double kappa_in = 1.0;
  double kappa_out = 1.0;

  static AttentionCost symmetric(double kappa) { return make(kappa, kappa); }

  static AttentionCost make(double kappa_in, double kappa_out) {
    AttentionCost c{kappa_in, kappa_out};
    c.validate();
    return c;
  }

  void validate() const {
    if (!(kappa_in > 0.0) || !(kappa_out > 0.0) || !std::isfinite(kappa_in) ||
        !std::isfinite(kappa_out)) {
      throw InvalidInput(fmt::format(
          "attention costs must be positive and finite, got ({}, {})", kappa_in, kappa_out));
    }
  }

  double operator[](State s) const { return s == State::In ? kappa_in : kappa_out; }
};

struct WeightedPosterior {
  Posterior posterior;
  double weight = 0.0;
};

struct InformationStructure {
  Prior prior;
  std::vector<WeightedPosterior> posteriors;
};

struct StructureDiagnostics {
  double weight_sum_residual = 0.0;
  /// Weighted average of posteriors minus the prior, per state.
  double bayes_residual_in = 0.0;
  double bayes_residual_out = 0.0;
  /// Indices of posteriors that leave the simplex or carry a negative weight.
  std::vector<std::size_t> simplex_violations;
  /// Indices whose implied pi(gamma | state) falls outside [0, 1].
  std::vector<std::size_t> conditional_violations;

  bool consistent() const {
    return std::abs(weight_sum_residual) <= kAggregateTolerance &&
           std::abs(bayes_residual_in) <= kAggregateTolerance &&
           std::abs(bayes_residual_out) <= kAggregateTolerance &&
           simplex_violations.empty() && conditional_violations.empty();
  }
};

inline StructureDiagnostics validate_information_structure(const InformationStructure& s) {
  StructureDiagnostics d;
  double wsum = 0.0, avg_in = 0.0, avg_out = 0.0;
  for (std::size_t i = 0; i < s.posteriors.size(); ++i) {
    const auto& [g, w] = s.posteriors[i];
    wsum += w;
    avg_in += w * g.p_in();
    avg_out += w * g.p_out();
    if (w < -kSimplexTolerance || g.p_in() < -kSimplexTolerance ||
        g.p_out() < -kSimplexTolerance ||
        std::abs(g.p_in() + g.p_out() - 1.0) > kSimplexTolerance) {
      d.simplex_violations.push_back(i);
    }
    bool bad_conditional = false;
    for (State st : kStates) {
      const double mu = s.prior[st];
      if (mu <= 0.0) continue;
      const double cond = w * g[st] / mu;
      if (cond < -kAggregateTolerance || cond > 1.0 + kAggregateTolerance) bad_conditional = true;
    }
    if (bad_conditional) d.conditional_violations.push_back(i);
  }
  if (s.posteriors.empty()) d.simplex_violations.push_back(0);
  d.weight_sum_residual = wsum - 1.0;
  d.bayes_residual_in = avg_in - s.prior.p_in();
  d.bayes_residual_out = avg_out - s.prior.p_out();
  return d;
}

/// x ln x with the convention 0 ln 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Attention cost of `structure`: for each state, kappa(state) times the
/// expected gain in gamma(state) ln gamma(state) over the prior. With equal
/// kappas this is kappa times the mutual information between posterior and
/// state (natural log).
inline double shannon_cost(const InformationStructure& structure, const AttentionCost& cost) {
  cost.validate();
  const auto diag = validate_information_structure(structure);
  if (!diag.consistent()) {
    throw InvalidInput(fmt::format(
        "information structure is not Bayes-consistent (weight residual {:.3g}, "
        "Bayes residual {:.3g})",
        diag.weight_sum_residual, diag.bayes_residual_in));
  }
  double total = 0.0;
  for (State st : kStates) {
    double expected = 0.0;
    for (const auto& [g, w] : structure.posteriors) expected += w * xlogx(g[st]);
    total += cost[st] * (expected - xlogx(structure.prior[st]));
  }
  return total;
}

namespace detail {
inline double round_sig(double v, int digits) {
  return std::stod(fmt::format("{:.{}g}", v, digits));
}
}  // namespace detail

inline nlohmann::json to_json(const InformationStructure& s) {
  using detail::round_sig;
  nlohmann::json j;
  j["prior"] = {{"p_in", round_sig(s.prior.p_in(), 12)},
                {"p_out", round_sig(s.prior.p_out(), 12)}};
  j["posteriors"] = nlohmann::json::array();
  for (const auto& [g, w] : s.posteriors) {
    j["posteriors"].push_back({{"p_in", round_sig(g.p_in(), 12)}, {"weight", round_sig(w, 12)}});
  }
  return j;
}

inline InformationStructure information_structure_from_json(const nlohmann::json& j) {
  try {
    InformationStructure s;
    s.prior = Prior::from_in(j.at("prior").at("p_in").get<double>());
    for (const auto& p : j.at("posteriors")) {
      s.posteriors.push_back(
          {Posterior::from_in(p.at("p_in").get<double>()), p.at("weight").get<double>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("bad information structure JSON: ") + e.what());
  }
}

}  // namespace oversight
