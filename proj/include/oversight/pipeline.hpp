#pragma once

// End-to-end chains over event logs: linkage, call restoration, audit,
// per-bin choice data, measured challenge rates, estimation and bounds, and
// the comparison of recovered parameters with the generator's truth.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oversight/config.hpp"
#include "oversight/data_pipeline.hpp"
#include "oversight/empirics.hpp"
#include "oversight/revealed_preference.hpp"
#include "oversight/structural_estimation.hpp"

namespace oversight {

struct LogAnalysis {
  LinkResult links;
  std::vector<BounceEvent> restored;
  CallAudit audit;
  std::vector<ConsolidatedRow> rows;
};

inline LogAnalysis analyse_logs(const std::vector<BounceEvent>& bounces,
                                const std::vector<PointRecord>& points,
                                const std::vector<ChallengeRecord>& challenges,
                                const std::vector<TruthLink>* truth, double window_mm) {
  LogAnalysis a;
  a.links = link_challenges(bounces, points, challenges, truth);
  a.restored = restore_original_calls(bounces, a.links, challenges);
  a.audit = identify_incorrect_calls(points, bounces);
  if (truth) score_audit(a.audit, bounces);
  std::set<std::int64_t> overturned;
  std::map<std::int64_t, bool> won;
  for (const auto& c : challenges) won[c.challenge_id] = c.won;
  for (const auto& p : a.links.pairs)
    if (won[p.challenge_id]) overturned.insert(p.bounce_id);
  a.rows = build_consolidated(a.restored, points, window_mm, &overturned);
  return a;
}

/// Calls against true states for lo <= |d| < hi in one period, as counts.
inline ChoiceData choice_data_from_rows(const std::vector<ConsolidatedRow>& rows, bool post,
                                        double lo_mm, double hi_mm) {
  CellCounts c{};
  for (const auto& r : rows) {
    const double m = std::abs(r.distance_mm);
    if (r.post_hk != post || m < lo_mm || !(m < hi_mm)) continue;
    const State st = r.distance_mm >= 0.0 ? State::In : State::Out;
    ++c[r.call_in ? 0 : 1][index(st)];
  }
  try {
    return ChoiceData::from_counts(c, post ? ChoiceRegime::Challenges : ChoiceRegime::NoChallenges);
  } catch (const InvalidInput&) {
    throw NumericalError(fmt::format("no {}-period bounces with {} <= |d| < {} mm",
                                     post ? "post" : "pre", lo_mm, hi_mm));
  }
}

struct ChallengeRates {
  double eta_in = 0.0;
  double eta_out = 0.0;
  std::int64_t mistakes_in = 0;
  std::int64_t mistakes_out = 0;
  double se_in = 0.0;
  double se_out = 0.0;
};

/// Share of post-period mistakes (after restoration) that were overturned.
inline ChallengeRates measure_challenge_rates(const std::vector<ConsolidatedRow>& rows,
                                              double lo_mm, double hi_mm) {
  std::array<std::int64_t, 2> n{0, 0}, k{0, 0};
  for (const auto& r : rows) {
    const double m = std::abs(r.distance_mm);
    if (!r.post_hk || m < lo_mm || !(m < hi_mm) || !r.incorrect) continue;
    const int s = r.distance_mm >= 0.0 ? 0 : 1;
    ++n[s];
    k[s] += r.overturned;
  }
  if (n[0] == 0 || n[1] == 0)
    throw NumericalError("challenge rates need post-period mistakes in both states");
  ChallengeRates c;
  c.mistakes_in = n[0];
  c.mistakes_out = n[1];
  c.eta_in = static_cast<double>(k[0]) / n[0];
  c.eta_out = static_cast<double>(k[1]) / n[1];
  c.se_in = std::sqrt(c.eta_in * (1.0 - c.eta_in) / n[0]);
  c.se_out = std::sqrt(c.eta_out * (1.0 - c.eta_out) / n[1]);
  return c;
}

/// Adjacent bins with identical parameters, pooled for estimation. Under the ILR
/// conditions revealed posteriors do not depend on the prior, so pooling
/// bins whose priors differ keeps the estimator consistent.
struct BinGroup {
  std::vector<std::size_t> bins;
  BinModel truth;
  double lo_mm = 0.0;
  double hi_mm = 0.0;
};

inline std::vector<BinGroup> group_bins(const SimConfig& cfg) {
  std::vector<BinGroup> groups;
  auto same = [](const BinModel& a, const BinModel& b) {
    return a.kappa.kappa_in == b.kappa.kappa_in && a.kappa.kappa_out == b.kappa.kappa_out &&
           a.c_in == b.c_in && a.c_out == b.c_out && a.eta_in == b.eta_in && a.eta_out == b.eta_out;
  };
  for (std::size_t i = 0; i < cfg.bins.size(); ++i) {
    if (!groups.empty() && same(groups.back().truth, cfg.bins[i])) {
      groups.back().bins.push_back(i);
      groups.back().hi_mm = cfg.bin_width_mm * (i + 1);
      continue;
    }
    BinGroup g;
    g.bins = {i};
    g.truth = cfg.bins[i];
    g.lo_mm = cfg.bin_width_mm * i;
    g.hi_mm = cfg.bin_width_mm * (i + 1);
    groups.push_back(g);
  }
  return groups;
}

struct ParameterCheck {
  std::string name;
  double truth = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  bool pass = false;

  double z() const { return se > 0.0 ? (estimate - truth) / se : std::nan(""); }
  double relative_error() const { return (estimate - truth) / std::abs(truth); }
};

struct GroupEstimate {
  BinGroup group;
  std::optional<TwoStageReport> report;
  std::optional<ChallengeRates> rates;
  std::vector<PenaltyBound> bounds;
  std::vector<ParameterCheck> checks;
  std::string error;

  bool pass() const {
    if (!report) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Two-stage estimation for one group, challenge rates measured from the
/// data unless given. The penalty standard errors include the sampling error
/// of measured challenge rates.
inline GroupEstimate estimate_group(const std::vector<ConsolidatedRow>& rows, const BinGroup& g,
                                    const EstimateSettings& settings, double max_se) {
  GroupEstimate e;
  e.group = g;
  try {
    const auto pre = choice_data_from_rows(rows, false, g.lo_mm, g.hi_mm);
    const auto post = choice_data_from_rows(rows, true, g.lo_mm, g.hi_mm);
    ChallengeRates rates;
    if (settings.eta_in && settings.eta_out) {
      rates.eta_in = *settings.eta_in;
      rates.eta_out = *settings.eta_out;
    } else {
      rates = measure_challenge_rates(rows, g.lo_mm, g.hi_mm);
      if (settings.eta_in) rates.eta_in = *settings.eta_in, rates.se_in = 0.0;
      if (settings.eta_out) rates.eta_out = *settings.eta_out, rates.se_out = 0.0;
    }
    e.rates = rates;
    auto r = two_stage_pipeline(pre, post, rates.eta_in, rates.eta_out, settings.convention);
    // d c / d eta = -(1 + c) / eta
    auto widen = [](std::optional<double>& se, double c, double eta, double se_eta) {
      if (!se) return;
      const double d = (1.0 + c) / eta * se_eta;
      se = std::sqrt(*se * *se + d * d);
    };
    widen(r.penalties.se_c_in, r.penalties.c_in, rates.eta_in, rates.se_in);
    widen(r.penalties.se_c_out, r.penalties.c_out, rates.eta_out, rates.se_out);
    e.report = r;
    try {
      e.bounds = nias_penalty_bounds(post, rates.eta_in, rates.eta_out);
      e.bounds.push_back(niac_bound(pre, post, rates.eta_in, rates.eta_out));
    } catch (const InvalidInput&) {
    }
    auto check = [&](const std::string& name, double truth, double est,
                     const std::optional<double>& se) {
      ParameterCheck c{name, truth, est, se.value_or(0.0), false};
      c.pass = se && std::abs(est - truth) <= max_se * *se;
      e.checks.push_back(c);
    };
    check("kappa_in", g.truth.kappa.kappa_in, r.kappa.kappa_in, r.se_kappa_in);
    check("kappa_out", g.truth.kappa.kappa_out, r.kappa.kappa_out, r.se_kappa_out);
    check("c_in", g.truth.c_in, r.penalties.c_in, r.penalties.se_c_in);
    check("c_out", g.truth.c_out, r.penalties.c_out, r.penalties.se_c_out);
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

inline std::string roundtrip_summary_csv(const std::vector<GroupEstimate>& groups) {
  std::ostringstream os;
  os << "group,lo_mm,hi_mm,parameter,truth,estimate,std_error,z,relative_error,pass\n";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    if (!g.report) {
      os << fmt::format("{},{},{},error,,,,,,0\n", i, g.group.lo_mm, g.group.hi_mm);
      continue;
    }
    for (const auto& c : g.checks)
      os << fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{:.3f},{:.4f},{}\n", i, g.group.lo_mm,
                        g.group.hi_mm, c.name, c.truth, c.estimate, c.se, c.z(),
                        c.relative_error(), c.pass ? 1 : 0);
  }
  return os.str();
}

inline std::string roundtrip_summary_text(const std::vector<GroupEstimate>& groups,
                                          double max_se) {
  std::ostringstream os;
  os << fmt::format("Recovered parameters (pass: |error| <= {} s.e.)\n", max_se);
  for (const auto& g : groups) {
    os << fmt::format("  bins {}-{} mm", g.group.lo_mm, g.group.hi_mm);
    if (!g.report) {
      os << fmt::format(": estimation failed: {}\n", g.error);
      continue;
    }
    os << fmt::format(" (eta_in {:.3f}, eta_out {:.3f})\n", g.rates->eta_in, g.rates->eta_out);
    for (const auto& c : g.checks)
      os << fmt::format("    {:<10} truth {:>8.4f}  estimate {:>8.4f}  se {:>7.4f}  z {:>6.2f}  {}\n",
                        c.name, c.truth, c.estimate, c.se, c.z(), c.pass ? "ok" : "FAIL");
  }
  return os.str();
}

inline nlohmann::json link_metrics_json(const LinkMetrics& m) {
  nlohmann::json j;
  j["n_challenges"] = m.n_challenges;
  j["n_linked"] = m.n_linked;
  j["merge_rate"] = m.merge_rate;
  if (m.n_correct) j["n_correct"] = *m.n_correct;
  if (m.false_positive_rate) j["false_positive_rate"] = *m.false_positive_rate;
  j["per_iteration"] = nlohmann::json::array();
  for (int k = 0; k < 8; ++k) {
    nlohmann::json p{{"iteration", k + 1}, {"linked", m.per_pass[k].linked}};
    if (m.n_correct) {
      p["correct"] = m.per_pass[k].correct;
      p["false_positive"] = m.per_pass[k].false_positive;
    }
    j["per_iteration"].push_back(p);
  }
  return j;
}

inline std::string links_csv(const LinkResult& r) {
  std::string s = "challenge_id,bounce_id,iteration\n";
  for (const auto& p : r.pairs) s += fmt::format("{},{},{}\n", p.challenge_id, p.bounce_id, p.iteration);
  for (auto id : r.unmatched) s += fmt::format("{},,\n", id);
  return s;
}

inline std::string audit_csv(const CallAudit& a) {
  std::string s = "point_id,bounce_id,stroke_index,criterion,inferred_original_call\n";
  for (const auto& f : a.flagged)
    s += fmt::format("{},{},{},{},{}\n", f.point_id, f.bounce_id, f.stroke_index, f.criterion,
                     to_string(f.inferred_original_call));
  return s;
}

inline nlohmann::json audit_metrics_json(const CallAudit& a) {
  nlohmann::json j;
  std::array<int, 4> counts{};
  for (const auto& f : a.flagged) ++counts[f.criterion - 1];
  j["flagged_total"] = a.flagged.size();
  j["criteria"] = nlohmann::json::array();
  for (int k = 0; k < 4; ++k) {
    nlohmann::json c{{"criterion", k + 1}, {"flagged", counts[k]}};
    if (a.metrics) {
      const auto& m = (*a.metrics)[k];
      c["truth"] = m.truth;
      c["true_positive"] = m.true_positive;
      c["precision"] = m.precision();
      c["recall"] = m.recall();
    }
    j["criteria"].push_back(c);
  }
  return j;
}

/// Plot-ready report files keyed by file name.
inline std::map<std::string, std::string> report_files(const std::vector<ConsolidatedRow>& rows,
                                                       const ReportSettings& s,
                                                       double bin_width_mm) {
  std::map<std::string, std::string> f;
  RegressionSpec spec;
  spec.bin_width_mm = bin_width_mm;
  std::string text;
  auto regression = [&](const std::string& stem, const std::string& title, auto keep) {
    std::vector<ConsolidatedRow> sub;
    for (const auto& r : rows)
      if (keep(r)) sub.push_back(r);
    try {
      const auto res = ols_fixed_effects(spec, sub);
      f[stem + ".csv"] = regression_table_csv(res);
      text += regression_table_text(res, title) + "\n";
    } catch (const std::exception& e) {
      text += fmt::format("{}\n  not estimable: {}\n\n", title, e.what());
    }
  };
  const double w = s.window_mm;
  regression("regression_all", fmt::format("Incorrect call, |d| < {} mm", w),
             [&](const ConsolidatedRow& r) { return std::abs(r.distance_mm) < w; });
  regression("regression_near", fmt::format("Incorrect call, |d| < {} mm", bin_width_mm),
             [&](const ConsolidatedRow& r) { return std::abs(r.distance_mm) < bin_width_mm; });
  regression("regression_serves_just_out", "Incorrect call, serves just out",
             [&](const ConsolidatedRow& r) {
               return r.is_serve && r.distance_mm < 0.0 && -r.distance_mm < bin_width_mm;
             });
  f["regressions.txt"] = text;
  f["bin_rates.csv"] = bin_rates_csv(binned_mistake_rates(rows, bin_width_mm, w));
  f["bin_rates_serve.csv"] = bin_rates_csv(binned_mistake_rates(
      rows, [](const ConsolidatedRow& r) { return r.is_serve; }, bin_width_mm, w));
  f["bin_rates_rally.csv"] = bin_rates_csv(binned_mistake_rates(
      rows, [](const ConsolidatedRow& r) { return !r.is_serve; }, bin_width_mm, w));
  f["bin_rates_early_rounds.csv"] = bin_rates_csv(binned_mistake_rates(
      rows, [](const ConsolidatedRow& r) { return r.round <= 2; }, bin_width_mm, w));
  f["bin_rates_late_rounds.csv"] = bin_rates_csv(binned_mistake_rates(
      rows, [](const ConsolidatedRow& r) { return r.round > 2; }, bin_width_mm, w));
  try {
    f["interaction_by_bin.csv"] = bin_effects_csv(interaction_by_bin(spec, rows, w));
  } catch (const std::exception& e) {
    f["interaction_by_bin.csv"] = std::string("error,") + e.what() + "\n";
  }
  const auto trend = callin_rate_trend(rows, s.trend_window_mm);
  f["callin_trend.csv"] = trend_csv(trend);
  nlohmann::json tj;
  if (trend.slope_pp_per_month) tj["slope_pp_per_month"] = *trend.slope_pp_per_month;
  if (trend.slope_se) tj["slope_se"] = *trend.slope_se;
  if (trend.pre_mean) {
    tj["pre_mean"] = *trend.pre_mean;
    tj["pre_ci"] = {*trend.pre_ci_lo, *trend.pre_ci_hi};
  }
  f["callin_trend.json"] = tj.dump(2) + "\n";
  return f;
}

}  // namespace oversight
