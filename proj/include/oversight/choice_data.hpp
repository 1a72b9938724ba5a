#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include <fmt/format.h>

#include "oversight/core_model.hpp"

namespace oversight {

enum class ChoiceRegime { NoChallenges, Challenges };

using CellCounts = std::array<std::array<std::int64_t, 2>, 2>;

/// State-dependent stochastic choice data: the joint distribution P(a, w)
/// of calls and true states, indexed [action][state].
struct ChoiceData {
  std::array<std::array<double, 2>, 2> joint{};
  std::optional<CellCounts> counts;
  ChoiceRegime regime = ChoiceRegime::NoChallenges;

  static ChoiceData from_joint(double in_in, double in_out, double out_in, double out_out,
                               ChoiceRegime regime = ChoiceRegime::NoChallenges) {
    ChoiceData d;
    d.joint = {{{in_in, in_out}, {out_in, out_out}}};
    d.regime = regime;
    d.validate();
    return d;
  }

  static ChoiceData from_counts(const CellCounts& c,
                                ChoiceRegime regime = ChoiceRegime::NoChallenges) {
    std::int64_t n = 0;
    for (const auto& row : c)
      for (auto v : row) {
        if (v < 0) throw InvalidInput("negative cell count");
        n += v;
      }
    if (n == 0) throw InvalidInput("choice data has no observations");
    ChoiceData d;
    for (Action a : kActions)
      for (State s : kStates)
        d.joint[index(a)][index(s)] =
            static_cast<double>(c[index(a)][index(s)]) / static_cast<double>(n);
    d.counts = c;
    d.regime = regime;
    return d;
  }

  double operator()(Action a, State s) const { return joint[index(a)][index(s)]; }

  double action_marginal(Action a) const { return joint[index(a)][0] + joint[index(a)][1]; }
  double state_marginal(State s) const {
    return joint[0][index(s)] + joint[1][index(s)];
  }

  std::int64_t total_count() const {
    if (!counts) return 0;
    std::int64_t n = 0;
    for (const auto& row : *counts)
      for (auto v : row) n += v;
    return n;
  }

  void validate() const {
    double sum = 0.0;
    for (const auto& row : joint)
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) {
          throw InvalidInput(fmt::format("choice probability {} is not a probability", p));
        }
        sum += p;
      }
    if (std::abs(sum - 1.0) > kAggregateTolerance) {
      throw InvalidInput(fmt::format("choice probabilities sum to {}, not 1", sum));
    }
  }
};

}  // namespace oversight
