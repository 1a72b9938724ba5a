#pragma once

// No Improving Action Switches (NIAS) and No Improving Attention Cycles
// (NIAC) for binary choice data, plus the half-plane bounds they imply on the
// oversight penalties (c_in, c_out).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oversight/choice_data.hpp"
#include "oversight/core_model.hpp"

namespace oversight {

inline constexpr double kSlackTolerance = 1e-10;

struct NiasResult {
  /// P(in,In)*adv(In) - P(in,Out)*adv(Out): gain from never switching in-calls to out.
  double slack_in_switch = 0.0;
  /// P(out,Out)*adv(Out) - P(out,In)*adv(In).
  double slack_out_switch = 0.0;
  bool pass = false;
  /// Multinomial standard errors of the slacks, when cell counts are known.
  std::optional<double> se_in_switch;
  std::optional<double> se_out_switch;
};

namespace detail {
/// Standard error of sum_k a_k * phat_k under multinomial sampling.
inline double linear_combination_se(const ChoiceData& d,
                                    const std::array<std::array<double, 2>, 2>& coef) {
  double mean = 0.0, second = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      mean += coef[a][s] * d.joint[a][s];
      second += coef[a][s] * coef[a][s] * d.joint[a][s];
    }
  return std::sqrt(std::max(0.0, second - mean * mean) / static_cast<double>(d.total_count()));
}
}  // namespace detail

inline NiasResult nias_check(const ChoiceData& data, const UtilityEnvironment& env) {
  data.validate();
  env.validate();
  const double adv_in = correct_call_advantage(env, State::In);
  const double adv_out = correct_call_advantage(env, State::Out);
  NiasResult r;
  r.slack_in_switch =
      data(Action::CallIn, State::In) * adv_in - data(Action::CallIn, State::Out) * adv_out;
  r.slack_out_switch =
      data(Action::CallOut, State::Out) * adv_out - data(Action::CallOut, State::In) * adv_in;
  r.pass = r.slack_in_switch >= -kSlackTolerance && r.slack_out_switch >= -kSlackTolerance;
  if (data.total_count() > 0) {
    r.se_in_switch = detail::linear_combination_se(data, {{{adv_in, -adv_out}, {0.0, 0.0}}});
    r.se_out_switch = detail::linear_combination_se(data, {{{0.0, 0.0}, {-adv_in, adv_out}}});
  }
  return r;
}

enum class BoundDirection { UpperBoundOnCIn, LowerBoundOnCIn };
enum class BoundSource { NiasInSwitch, NiasOutSwitch, Niac };

inline const char* to_string(BoundDirection d) {
  return d == BoundDirection::UpperBoundOnCIn ? "upper" : "lower";
}
inline const char* to_string(BoundSource s) {
  switch (s) {
    case BoundSource::NiasInSwitch: return "NIAS_in_switch";
    case BoundSource::NiasOutSwitch: return "NIAS_out_switch";
    case BoundSource::Niac: return "NIAC";
  }
  return "?";
}

/// c_in <= intercept + slope * c_out (upper) or c_in >= ... (lower).
struct PenaltyBound {
  double intercept = 0.0;
  double slope = 0.0;
  BoundDirection direction = BoundDirection::UpperBoundOnCIn;
  BoundSource source = BoundSource::NiasInSwitch;

  double evaluate(double c_out) const { return intercept + slope * c_out; }

  bool satisfied(double c_in, double c_out, double tol = kSlackTolerance) const {
    const double line = evaluate(c_out);
    return direction == BoundDirection::UpperBoundOnCIn ? c_in <= line + tol
                                                        : c_in >= line - tol;
  }
};

/// Half-planes on c_in from the two NIAS inequalities under challenges.
inline std::vector<PenaltyBound> nias_penalty_bounds(const ChoiceData& data, double eta_in,
                                                     double eta_out) {
  data.validate();
  if (eta_in < 0.0 || eta_in > 1.0 || eta_out < 0.0 || eta_out > 1.0) {
    throw InvalidInput("challenge rates must lie in [0,1]");
  }
  const double p_ii = data(Action::CallIn, State::In), p_io = data(Action::CallIn, State::Out);
  const double p_oi = data(Action::CallOut, State::In), p_oo = data(Action::CallOut, State::Out);
  const double den_in = p_ii * eta_in, den_out = p_oi * eta_in;
  if (!(den_in > 0.0)) {
    throw InvalidInput("NIAS in-switch bound undefined: P(call in, In) * eta_in is zero");
  }
  if (!(den_out > 0.0)) {
    throw InvalidInput("NIAS out-switch bound undefined: P(call out, In) * eta_in is zero");
  }
  PenaltyBound upper{(p_ii * (1.0 - eta_in) - p_io * (1.0 - eta_out)) / den_in,
                     p_io * eta_out / den_in, BoundDirection::UpperBoundOnCIn,
                     BoundSource::NiasInSwitch};
  PenaltyBound lower{(p_oi * (1.0 - eta_in) - p_oo * (1.0 - eta_out)) / den_out,
                     p_oo * eta_out / den_out, BoundDirection::LowerBoundOnCIn,
                     BoundSource::NiasOutSwitch};
  return {upper, lower};
}

/// NIAC across a no-challenge problem and a challenge problem with the same
/// prior. The inequality direction follows the sign of the divisor
/// (P_N(out,In) - P_C(out,In)) * eta_in.
inline PenaltyBound niac_bound(const ChoiceData& no_challenge, const ChoiceData& challenge,
                               double eta_in, double eta_out) {
  no_challenge.validate();
  challenge.validate();
  const double d_oi = challenge(Action::CallOut, State::In) - no_challenge(Action::CallOut, State::In);
  const double d_io = challenge(Action::CallIn, State::Out) - no_challenge(Action::CallIn, State::Out);
  const double den = -d_oi * eta_in;
  if (den == 0.0 || std::abs(den) < 1e-15) {
    throw InvalidInput("NIAC bound undefined: Type II mistake rates identical across regimes");
  }
  PenaltyBound b;
  b.intercept = (d_oi * eta_in + d_io * eta_out) / den;
  b.slope = d_io * eta_out / den;
  b.direction = den > 0.0 ? BoundDirection::UpperBoundOnCIn : BoundDirection::LowerBoundOnCIn;
  b.source = BoundSource::Niac;
  return b;
}

struct PenaltyInterval {
  double c_out = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool empty() const { return lower > upper; }
};

/// Pointwise intersection of the half-planes over a grid of c_out values.
inline std::vector<PenaltyInterval> penalty_region(const std::vector<PenaltyBound>& bounds,
                                                   const std::vector<double>& c_out_grid) {
  if (bounds.empty()) throw InvalidInput("penalty_region needs at least one bound");
  std::vector<PenaltyInterval> out;
  out.reserve(c_out_grid.size());
  for (double co : c_out_grid) {
    PenaltyInterval iv;
    iv.c_out = co;
    for (const auto& b : bounds) {
      const double v = b.evaluate(co);
      if (b.direction == BoundDirection::UpperBoundOnCIn)
        iv.upper = std::min(iv.upper, v);
      else
        iv.lower = std::max(iv.lower, v);
    }
    out.push_back(iv);
  }
  return out;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v;
  if (n <= 1) return {lo};
  v.reserve(n);
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  return v;
}

}  // namespace oversight
