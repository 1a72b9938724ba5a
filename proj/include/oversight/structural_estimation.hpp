#pragma once

// Two-stage method-of-moments estimator. Stage 1 inverts the no-challenge
// optimality conditions for the attention costs; stage 2 inverts the
// challenge-period conditions for the oversight penalties given those costs.
//
// Two conventions for the log term are supported:
//   AsPrinted          cross-posterior gaps, e.g. ln g_in(In) - ln g_out(In),
//                      which is the exact inverse of the ILR solver;
//   TableReproduction  within-posterior log-odds ln(g/(1-g)) for each call.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "oversight/choice_data.hpp"
#include "oversight/core_model.hpp"

namespace oversight {

struct RevealedPosteriors {
  double in_given_call_in = 0.0;    // P(In | call in)
  double out_given_call_out = 0.0;  // P(Out | call out)

  bool boundary() const {
    return in_given_call_in <= 0.0 || in_given_call_in >= 1.0 || out_given_call_out <= 0.0 ||
           out_given_call_out >= 1.0;
  }
};

enum class EstimationConvention { AsPrinted, TableReproduction };

inline const char* to_string(EstimationConvention c) {
  return c == EstimationConvention::AsPrinted ? "printed" : "table";
}

inline EstimationConvention parse_convention(const std::string& s) {
  if (s == "printed" || s == "as_printed" || s == "AsPrinted") return EstimationConvention::AsPrinted;
  if (s == "table" || s == "table_reproduction" || s == "TableReproduction")
    return EstimationConvention::TableReproduction;
  throw InvalidInput("unknown estimation convention '" + s + "' (expected printed|table)");
}

inline RevealedPosteriors revealed_posteriors(const ChoiceData& data) {
  data.validate();
  const double m_in = data.action_marginal(Action::CallIn);
  const double m_out = data.action_marginal(Action::CallOut);
  if (!(m_in > 0.0) || !(m_out > 0.0)) {
    throw InvalidInput(fmt::format(
        "revealed posteriors need both calls to be used (marginals {:.6g}, {:.6g})", m_in, m_out));
  }
  return {data(Action::CallIn, State::In) / m_in, data(Action::CallOut, State::Out) / m_out};
}

/// Log term (Delta_in, Delta_out) under `convention`. With the ILR
/// conditions, Delta_state = advantage(state) / kappa_state.
inline std::array<double, 2> log_terms(const RevealedPosteriors& rp,
                                       EstimationConvention convention) {
  if (rp.boundary()) {
    throw InvalidInput(fmt::format(
        "revealed posteriors ({:.6g}, {:.6g}) are on the boundary; log terms are infinite",
        rp.in_given_call_in, rp.out_given_call_out));
  }
  const double gi = rp.in_given_call_in, go = rp.out_given_call_out;
  if (convention == EstimationConvention::AsPrinted) {
    return {std::log(gi) - std::log(1.0 - go), std::log(go) - std::log(1.0 - gi)};
  }
  return {std::log(gi) - std::log1p(-gi), std::log(go) - std::log1p(-go)};
}

inline AttentionCost estimate_kappa(const RevealedPosteriors& rp,
                                    EstimationConvention convention) {
  const auto d = log_terms(rp, convention);
  if (!(d[0] > 0.0) || !(d[1] > 0.0)) {
    throw InvalidInput(fmt::format(
        "choices are not informative about the state (log terms {:.6g}, {:.6g})", d[0], d[1]));
  }
  return {1.0 / d[0], 1.0 / d[1]};
}

/// c = (1 - kappa * Delta) / eta - 1.
inline double penalty_from_log_term(double kappa, double log_term, double eta) {
  if (!(eta > 0.0) || eta > 1.0) {
    throw InvalidInput(fmt::format("penalty unidentified without challenges (eta = {})", eta));
  }
  return (1.0 - kappa * log_term) / eta - 1.0;
}

struct PenaltyEstimate {
  double c_in = 0.0;
  double c_out = 0.0;
  double eta_in = 0.0;
  double eta_out = 0.0;
  std::optional<double> se_c_in;
  std::optional<double> se_c_out;

  bool positive_flag() const { return c_in > 0.0 || c_out > 0.0; }
};

inline PenaltyEstimate estimate_penalties(const RevealedPosteriors& rp_post,
                                          const AttentionCost& kappa, double eta_in,
                                          double eta_out, EstimationConvention convention) {
  kappa.validate();
  const auto d = log_terms(rp_post, convention);
  PenaltyEstimate e;
  e.eta_in = eta_in;
  e.eta_out = eta_out;
  e.c_in = penalty_from_log_term(kappa.kappa_in, d[0], eta_in);
  e.c_out = penalty_from_log_term(kappa.kappa_out, d[1], eta_out);
  if (!std::isfinite(e.c_in) || !std::isfinite(e.c_out)) {
    throw NumericalError("penalty estimate is not finite");
  }
  return e;
}

namespace detail {

/// Multinomial delta-method variance of the log terms, by central differences
/// on the cell probabilities.
inline std::array<std::array<double, 2>, 2> log_term_covariance(const ChoiceData& data,
                                                                 EstimationConvention conv) {
  const double n = static_cast<double>(data.total_count());
  std::array<std::array<double, 4>, 2> grad{};
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    ChoiceData up = data, dn = data;
    up.joint[k / 2][k % 2] += h;
    dn.joint[k / 2][k % 2] -= h;
    auto rp = [](const ChoiceData& d) {
      const double mi = d.joint[0][0] + d.joint[0][1], mo = d.joint[1][0] + d.joint[1][1];
      return RevealedPosteriors{d.joint[0][0] / mi, d.joint[1][1] / mo};
    };
    const auto fu = log_terms(rp(up), conv), fd = log_terms(rp(dn), conv);
    for (int j = 0; j < 2; ++j) grad[j][k] = (fu[j] - fd[j]) / (2.0 * h);
  }
  std::array<double, 4> p{data.joint[0][0], data.joint[0][1], data.joint[1][0], data.joint[1][1]};
  std::array<std::array<double, 2>, 2> cov{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const double sigma = (k == l ? p[k] : 0.0) - p[k] * p[l];
          s += grad[i][k] * sigma * grad[j][l];
        }
      cov[i][j] = s / n;
    }
  return cov;
}

}  // namespace detail

struct TwoStageReport {
  EstimationConvention convention = EstimationConvention::AsPrinted;
  RevealedPosteriors pre;
  RevealedPosteriors post;
  AttentionCost kappa;
  std::optional<double> se_kappa_in;
  std::optional<double> se_kappa_out;
  PenaltyEstimate penalties;
};

inline TwoStageReport two_stage_pipeline(const ChoiceData& data_pre, const ChoiceData& data_post,
                                         double eta_in, double eta_out,
                                         EstimationConvention convention) {
  if (data_pre.regime != ChoiceRegime::NoChallenges) {
    throw InvalidInput("stage 1 needs data from the no-challenge regime");
  }
  if (data_post.regime != ChoiceRegime::Challenges) {
    throw InvalidInput("stage 2 needs data from the challenge regime");
  }
  TwoStageReport r;
  r.convention = convention;
  r.pre = revealed_posteriors(data_pre);
  r.kappa = estimate_kappa(r.pre, convention);
  r.post = revealed_posteriors(data_post);
  r.penalties = estimate_penalties(r.post, r.kappa, eta_in, eta_out, convention);

  if (data_pre.total_count() > 0) {
    const auto d_pre = log_terms(r.pre, convention);
    const auto cov_pre = detail::log_term_covariance(data_pre, convention);
    // kappa = 1 / Delta  =>  var(kappa) = var(Delta) / Delta^4
    r.se_kappa_in = std::sqrt(cov_pre[0][0]) / (d_pre[0] * d_pre[0]);
    r.se_kappa_out = std::sqrt(cov_pre[1][1]) / (d_pre[1] * d_pre[1]);
    if (data_post.total_count() > 0) {
      const auto d_post = log_terms(r.post, convention);
      const auto cov_post = detail::log_term_covariance(data_post, convention);
      // c = (1 - Delta_post / Delta_pre) / eta - 1, samples independent.
      auto se_c = [&](int j, double eta) {
        const double dp = d_pre[j], dq = d_post[j];
        const double var = (cov_post[j][j] / (dp * dp) + dq * dq * cov_pre[j][j] / (dp * dp * dp * dp)) /
                           (eta * eta);
        return std::sqrt(var);
      };
      r.penalties.se_c_in = se_c(0, eta_in);
      r.penalties.se_c_out = se_c(1, eta_out);
    }
  }
  return r;
}

/// Two tables: revealed posteriors with attention costs, then challenge
/// rates with oversight penalties.
inline std::string report_text(const TwoStageReport& r, const std::string& label = "estimate") {
  std::ostringstream os;
  auto se = [](const std::optional<double>& v) {
    return v ? fmt::format(" ({:.3f})", *v) : std::string();
  };
  os << fmt::format("Estimated optimal posteriors and costs of attention [{} convention]\n",
                    to_string(r.convention));
  os << fmt::format("  {:<20}{:>16}\n", "parameter", label);
  os << fmt::format("  {:<20}{:>16.3f}\n", "gamma_in(In)", r.pre.in_given_call_in);
  os << fmt::format("  {:<20}{:>16.3f}\n", "gamma_out(Out)", r.pre.out_given_call_out);
  os << fmt::format("  {:<20}{:>16}\n", "kappa_in",
                    fmt::format("{:.3f}{}", r.kappa.kappa_in, se(r.se_kappa_in)));
  os << fmt::format("  {:<20}{:>16}\n", "kappa_out",
                    fmt::format("{:.3f}{}", r.kappa.kappa_out, se(r.se_kappa_out)));
  os << "\nEstimated challenge rates and oversight penalties\n";
  os << fmt::format("  {:<20}{:>16}\n", "parameter", label);
  os << fmt::format("  {:<20}{:>16.3f}\n", "eta_in", r.penalties.eta_in);
  os << fmt::format("  {:<20}{:>16.3f}\n", "eta_out", r.penalties.eta_out);
  os << fmt::format("  {:<20}{:>16}\n", "c_in",
                    fmt::format("{:.3f}{}", r.penalties.c_in, se(r.penalties.se_c_in)));
  os << fmt::format("  {:<20}{:>16}\n", "c_out",
                    fmt::format("{:.3f}{}", r.penalties.c_out, se(r.penalties.se_c_out)));
  if (r.penalties.positive_flag()) os << "  warning: positive penalty estimate (model predicts <= 0)\n";
  return os.str();
}

inline std::string report_csv(const TwoStageReport& r) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string();
  };
  os << "table,parameter,value,std_error\n";
  os << fmt::format("posteriors,gamma_in_in,{:.6f},\n", r.pre.in_given_call_in);
  os << fmt::format("posteriors,gamma_out_out,{:.6f},\n", r.pre.out_given_call_out);
  os << fmt::format("posteriors,kappa_in,{:.6f},{}\n", r.kappa.kappa_in, opt(r.se_kappa_in));
  os << fmt::format("posteriors,kappa_out,{:.6f},{}\n", r.kappa.kappa_out, opt(r.se_kappa_out));
  os << fmt::format("penalties,gamma_in_in_post,{:.6f},\n", r.post.in_given_call_in);
  os << fmt::format("penalties,gamma_out_out_post,{:.6f},\n", r.post.out_given_call_out);
  os << fmt::format("penalties,eta_in,{:.6f},\n", r.penalties.eta_in);
  os << fmt::format("penalties,eta_out,{:.6f},\n", r.penalties.eta_out);
  os << fmt::format("penalties,c_in,{:.6f},{}\n", r.penalties.c_in, opt(r.penalties.se_c_in));
  os << fmt::format("penalties,c_out,{:.6f},{}\n", r.penalties.c_out, opt(r.penalties.se_c_out));
  return os.str();
}

}  // namespace oversight
