#pragma once

// Forward rational-inattention problem for the two-state, two-call umpire.
//
// The optimal Shannon structure uses one posterior per call. The posteriors
// follow from the invariant likelihood ratio (ILR) conditions
//
//   gamma_in(In) / gamma_out(In)           = exp(advantage(In)  / kappa_in)
//   (1 - gamma_out(In)) / (1 - gamma_in(In)) = exp(advantage(Out) / kappa_out)
//
// which are linear in (gamma_in(In), gamma_out(In)) once exponentiated.
// Mixing weights then come from Bayes plausibility; a prior outside the
// posterior span means no information is bought.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "oversight/choice_data.hpp"
#include "oversight/core_model.hpp"

namespace oversight {

enum class Regime { Interior, CornerAllIn, CornerAllOut };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Interior: return "interior";
    case Regime::CornerAllIn: return "corner_all_in";
    case Regime::CornerAllOut: return "corner_all_out";
  }
  return "?";
}

struct PosteriorPair {
  Posterior call_in;   // posterior at which the ball is called in
  Posterior call_out;  // posterior at which the ball is called out
};

struct IlrResiduals {
  double in = 0.0;   // ln(g_in(In)/g_out(In)) - adv(In)/kappa_in
  double out = 0.0;  // ln((1-g_out(In))/(1-g_in(In))) - adv(Out)/kappa_out
};

struct SolverSolution {
  InformationStructure structure;
  Posterior posterior_call_in;
  Posterior posterior_call_out;
  Regime regime = Regime::Interior;
  double weight_call_in = 0.0;
  double net_utility = 0.0;
  ChoiceData choice_probs;
};

inline constexpr double kBoundaryTolerance = 1e-12;

namespace detail {

/// Posterior pair with gamma_in(In) = x, gamma_out(In) = y built from the
/// complements so that both components are accurate near 0 and 1.
inline PosteriorPair make_pair(double x, double one_minus_x, double y, double one_minus_y) {
  return {Posterior(x, one_minus_x), Posterior(y, one_minus_y)};
}

inline std::pair<double, double> log_odds_gaps(const UtilityEnvironment& env,
                                               const AttentionCost& cost) {
  env.validate();
  cost.validate();
  const double adv_in = correct_call_advantage(env, State::In);
  const double adv_out = correct_call_advantage(env, State::Out);
  if (!(adv_in > 0.0) || !(adv_out > 0.0)) {
    throw InvalidInput(fmt::format(
        "correct calls must strictly dominate mistakes in both states "
        "(advantages {:.6g}, {:.6g})",
        adv_in, adv_out));
  }
  return {adv_in / cost.kappa_in, adv_out / cost.kappa_out};
}

}  // namespace detail

inline PosteriorPair solve_ilr_posteriors(const UtilityEnvironment& env,
                                          const AttentionCost& cost) {
  const auto [a, b] = detail::log_odds_gaps(env, cost);
  // y = (e^b - 1) / (e^{a+b} - 1), 1 - x = (e^a - 1) / (e^{a+b} - 1), written
  // in a form that neither overflows nor cancels.
  const double y = -std::expm1(-b) / (std::expm1(a) - std::expm1(-b));
  const double one_minus_x = -std::expm1(-a) / (std::expm1(b) - std::expm1(-a));
  const double x = 1.0 - one_minus_x;
  const double one_minus_y = 1.0 - y;
  return detail::make_pair(x, one_minus_x, y, one_minus_y);
}

inline IlrResiduals ilr_residuals(const UtilityEnvironment& env, const AttentionCost& cost,
                                  const PosteriorPair& p) {
  const auto [a, b] = detail::log_odds_gaps(env, cost);
  return {std::log(p.call_in.p_in() / p.call_out.p_in()) - a,
          std::log(p.call_out.p_out() / p.call_in.p_out()) - b};
}

/// Exact first-order conditions of the asymmetric Shannon objective.
/// They coincide with the ILR pair when kappa_in == kappa_out; otherwise both
/// conditions carry the extra term (kappa_in - kappa_out)(x - y).
inline PosteriorPair solve_exact_asymmetric_posteriors(const UtilityEnvironment& env,
                                                       const AttentionCost& cost) {
  const double adv_in = correct_call_advantage(env, State::In);
  const double adv_out = correct_call_advantage(env, State::Out);
  const auto start = solve_ilr_posteriors(env, cost);
  const double ki = cost.kappa_in, ko = cost.kappa_out, dk = ki - ko;
  auto logistic = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  double u = logit(start.call_in.p_in()), v = logit(start.call_out.p_in());
  auto residual = [&](double uu, double vv) {
    const double x = logistic(uu), y = logistic(vv);
    // ln(x/y) and ln((1-y)/(1-x)) in log-odds coordinates.
    const double lx = -std::log1p(std::exp(-uu)), ly = -std::log1p(std::exp(-vv));
    const double l1x = -std::log1p(std::exp(uu)), l1y = -std::log1p(std::exp(vv));
    return std::array<double, 2>{ki * (lx - ly) - adv_in - dk * (x - y),
                                 ko * (l1y - l1x) - adv_out + dk * (x - y)};
  };
  for (int iter = 0; iter < 200; ++iter) {
    const auto f = residual(u, v);
    if (std::abs(f[0]) + std::abs(f[1]) < 1e-14) break;
    const double x = logistic(u), y = logistic(v);
    const double dxdu = x * (1.0 - x), dydv = y * (1.0 - y);
    const double j00 = (ki / x - dk) * dxdu;
    const double j01 = (-ki / y + dk) * dydv;
    const double j10 = (ko / (1.0 - x) + dk) * dxdu;
    const double j11 = (-ko / (1.0 - y) - dk) * dydv;
    const double det = j00 * j11 - j01 * j10;
    if (!std::isfinite(det) || det == 0.0) break;
    double du = -(j11 * f[0] - j01 * f[1]) / det;
    double dv = -(-j10 * f[0] + j00 * f[1]) / det;
    double step = 1.0;
    const double norm0 = std::abs(f[0]) + std::abs(f[1]);
    while (step > 1e-6) {
      const auto g = residual(u + step * du, v + step * dv);
      if (std::abs(g[0]) + std::abs(g[1]) < norm0) break;
      step *= 0.5;
    }
    u += step * du;
    v += step * dv;
  }
  const auto f = residual(u, v);
  if (!(std::abs(f[0]) + std::abs(f[1]) < 1e-9) || !(u > v)) {
    throw NumericalError("exact asymmetric first-order conditions did not converge");
  }
  const double x = logistic(u), y = logistic(v);
  return detail::make_pair(x, logistic(-u), y, logistic(-v));
}

inline double expected_gross_utility(const UtilityEnvironment& env, Action a,
                                     double p_in) {
  return p_in * gross_utility(env, a, State::In) +
         (1.0 - p_in) * gross_utility(env, a, State::Out);
}

inline ChoiceData predicted_choice_data(const SolverSolution& s) {
  ChoiceData d;
  const double w = s.weight_call_in;
  for (State st : kStates) {
    d.joint[index(Action::CallIn)][index(st)] = w * s.posterior_call_in[st];
    d.joint[index(Action::CallOut)][index(st)] = (1.0 - w) * s.posterior_call_out[st];
  }
  return d;
}

namespace detail {

inline void finish_solution(const UtilityEnvironment& env, const AttentionCost& cost,
                            SolverSolution& sol) {
  const double w = sol.weight_call_in;
  const double gross =
      w * expected_gross_utility(env, Action::CallIn, sol.posterior_call_in.p_in()) +
      (1.0 - w) * expected_gross_utility(env, Action::CallOut, sol.posterior_call_out.p_in());
  sol.net_utility = gross - shannon_cost(sol.structure, cost);
  sol.choice_probs = predicted_choice_data(sol);
  sol.choice_probs.regime = env.has_challenges() ? ChoiceRegime::Challenges
                                                 : ChoiceRegime::NoChallenges;
}

inline SolverSolution corner_solution(const UtilityEnvironment& env, const AttentionCost& cost,
                                      const Prior& prior) {
  SolverSolution sol;
  const bool in_best = expected_gross_utility(env, Action::CallIn, prior.p_in()) >=
                       expected_gross_utility(env, Action::CallOut, prior.p_in());
  sol.regime = in_best ? Regime::CornerAllIn : Regime::CornerAllOut;
  sol.weight_call_in = in_best ? 1.0 : 0.0;
  sol.posterior_call_in = as_posterior(prior);
  sol.posterior_call_out = as_posterior(prior);
  sol.structure = {prior, {{as_posterior(prior), 1.0}}};
  finish_solution(env, cost, sol);
  return sol;
}

inline SolverSolution two_posterior_solution(const UtilityEnvironment& env,
                                             const AttentionCost& cost, const Prior& prior,
                                             const PosteriorPair& pair) {
  const double x = pair.call_in.p_in(), y = pair.call_out.p_in();
  const double w = std::clamp((prior.p_in() - y) / (x - y), 0.0, 1.0);
  SolverSolution sol;
  sol.regime = Regime::Interior;
  sol.weight_call_in = w;
  sol.posterior_call_in = pair.call_in;
  sol.posterior_call_out = pair.call_out;
  sol.structure = {prior, {{pair.call_in, w}, {pair.call_out, 1.0 - w}}};
  finish_solution(env, cost, sol);
  return sol;
}

}  // namespace detail

/// Optimal structure given a prior. Posteriors come from the ILR pair;
/// priors outside their span (beyond kBoundaryTolerance) yield the corner in
/// which the unconditionally better call is always made.
inline SolverSolution solve_optimal_structure(const UtilityEnvironment& env,
                                              const AttentionCost& cost, const Prior& prior) {
  const auto pair = solve_ilr_posteriors(env, cost);
  const double mu = prior.p_in();
  if (mu >= pair.call_out.p_in() - kBoundaryTolerance &&
      mu <= pair.call_in.p_in() + kBoundaryTolerance) {
    return detail::two_posterior_solution(env, cost, prior, pair);
  }
  return detail::corner_solution(env, cost, prior);
}

/// Same as solve_optimal_structure but with the exact asymmetric first-order
/// posteriors in place of the ILR pair.
inline SolverSolution solve_exact_structure(const UtilityEnvironment& env,
                                            const AttentionCost& cost, const Prior& prior) {
  const auto pair = solve_exact_asymmetric_posteriors(env, cost);
  const double mu = prior.p_in();
  if (mu >= pair.call_out.p_in() - kBoundaryTolerance &&
      mu <= pair.call_in.p_in() + kBoundaryTolerance) {
    return detail::two_posterior_solution(env, cost, prior, pair);
  }
  return detail::corner_solution(env, cost, prior);
}

/// Exhaustive grid search over Bayes-plausible posterior pairs, refined three
/// times around the incumbent. At every posterior the better call is taken,
/// so the oracle does not presuppose which posterior goes with which call.
inline SolverSolution brute_force_oracle(const UtilityEnvironment& env,
                                         const AttentionCost& cost, const Prior& prior,
                                         int grid_resolution) {
  if (grid_resolution < 100) throw InvalidInput("oracle grid resolution must be >= 100");
  env.validate();
  cost.validate();
  const double mu = prior.p_in();
  auto penalty = [&](double p) {
    return cost.kappa_in * xlogx(p) + cost.kappa_out * xlogx(1.0 - p);
  };
  auto value = [&](double p) {
    return std::max(expected_gross_utility(env, Action::CallIn, p),
                    expected_gross_utility(env, Action::CallOut, p)) -
           penalty(p);
  };
  const double no_info = value(mu) + penalty(mu);

  double best = no_info, best_x = mu, best_y = mu;
  double x_lo = mu, x_hi = 1.0, y_lo = 0.0, y_hi = mu;
  const int n = grid_resolution;
  std::vector<double> xs(n + 1), ys(n + 1), vx(n + 1), vy(n + 1);
  for (int level = 0; level < 4; ++level) {
    for (int i = 0; i <= n; ++i) {
      xs[i] = x_lo + (x_hi - x_lo) * i / n;
      ys[i] = y_lo + (y_hi - y_lo) * i / n;
      vx[i] = value(xs[i]);
      vy[i] = value(ys[i]);
    }
    for (int i = 0; i <= n; ++i) {
      const double x = xs[i];
      for (int j = 0; j <= n; ++j) {
        const double y = ys[j];
        if (x - y <= 0.0) continue;
        const double w = (mu - y) / (x - y);
        const double v = w * vx[i] + (1.0 - w) * vy[j] + penalty(mu);
        if (v > best) {
          best = v;
          best_x = x;
          best_y = y;
        }
      }
    }
    const double hx = 2.0 * (x_hi - x_lo) / n, hy = 2.0 * (y_hi - y_lo) / n;
    x_lo = std::max(mu, best_x - hx);
    x_hi = std::min(1.0, best_x + hx);
    y_lo = std::max(0.0, best_y - hy);
    y_hi = std::min(mu, best_y + hy);
  }

  auto best_action = [&](double p) {
    return expected_gross_utility(env, Action::CallIn, p) >=
                   expected_gross_utility(env, Action::CallOut, p)
               ? Action::CallIn
               : Action::CallOut;
  };
  if (best_x - best_y <= 0.0 || best_action(best_x) == best_action(best_y)) {
    auto sol = detail::corner_solution(env, cost, prior);
    return sol;
  }
  PosteriorPair pair{Posterior::from_in(best_x), Posterior::from_in(best_y)};
  auto sol = detail::two_posterior_solution(env, cost, prior, pair);
  return sol;
}

}  // namespace oversight
