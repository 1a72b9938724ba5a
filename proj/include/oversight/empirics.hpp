#pragma once

// Reduced-form analysis of consolidated call data: binned mistake rates, the
// linear probability model of an incorrect call on the oversight indicator
// with point and match controls, bin-by-treatment interactions and the
// call-in rate trend.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "oversight/errors.hpp"
#include "oversight/match_simulator.hpp"

namespace oversight {

/// One called bounce near the line, joined with its point.
struct ConsolidatedRow {
  std::int64_t tournament_id = 0;
  std::int64_t match_id = 0;
  bool post_hk = false;
  double month = 0.0;
  double distance_mm = 0.0;
  bool is_serve = false;
  double speed_kmh = 0.0;
  bool incorrect = false;
  bool call_in = false;
  /// Linked to a successful challenge.
  bool overturned = false;
  int set = 1;
  int game = 1;
  bool tiebreak = false;
  std::string score;
  int round = 1;
  int tier = 0;
};

/// Rows for bounces with |d| < window_mm. `bounces` should carry restored
/// (pre-challenge) calls; `overturned` lists bounces linked to won challenges.
inline std::vector<ConsolidatedRow> build_consolidated(
    const std::vector<BounceEvent>& bounces, const std::vector<PointRecord>& points,
    double window_mm = 100.0, const std::set<std::int64_t>* overturned = nullptr) {
  std::unordered_map<std::int64_t, const PointRecord*> point_of;
  for (const auto& p : points) point_of.emplace(p.point_id, &p);
  std::vector<ConsolidatedRow> rows;
  for (const auto& b : bounces) {
    if (!(std::abs(b.distance_mm) < window_mm) || b.is_let) continue;
    const auto it = point_of.find(b.point_id);
    if (it == point_of.end()) {
      throw DataFormatError(fmt::format("bounce {} refers to unknown point {}", b.bounce_id,
                                        b.point_id));
    }
    const PointRecord& p = *it->second;
    ConsolidatedRow r;
    r.tournament_id = b.tournament_id;
    r.match_id = b.match_id;
    r.post_hk = p.post_hk;
    r.month = p.month;
    r.distance_mm = b.distance_mm;
    r.is_serve = b.is_serve;
    r.speed_kmh = b.speed_kmh;
    r.call_in = b.call == Action::CallIn;
    r.incorrect = b.call != matching_action(b.true_state);
    r.overturned = overturned && overturned->count(b.bounce_id) > 0;
    r.set = p.set;
    r.game = p.game;
    r.tiebreak = p.tiebreak;
    r.score = p.score;
    r.round = p.round;
    r.tier = p.tier;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Signed bin index floor(d / width): -1 is the first bin outside the line,
/// 0 the first bin inside.
inline int signed_bin(double distance_mm, double width_mm) {
  return static_cast<int>(std::floor(distance_mm / width_mm));
}

struct RateEstimate {
  std::int64_t n = 0;
  std::int64_t events = 0;
  std::optional<double> rate;
  std::optional<double> se;
};

inline RateEstimate make_rate(std::int64_t events, std::int64_t n) {
  RateEstimate r;
  r.n = n;
  r.events = events;
  if (n > 0) {
    const double p = static_cast<double>(events) / static_cast<double>(n);
    r.rate = p;
    r.se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  }
  return r;
}

struct BinRate {
  double lo_mm = 0.0;
  double hi_mm = 0.0;
  RateEstimate pre;
  RateEstimate post;
};

template <class Pred>
std::vector<BinRate> binned_mistake_rates(const std::vector<ConsolidatedRow>& rows, Pred keep,
                                          double bin_width_mm = 20.0, double window_mm = 100.0) {
  const int half = static_cast<int>(std::lround(window_mm / bin_width_mm));
  std::vector<std::array<std::int64_t, 4>> counts(2 * half, {0, 0, 0, 0});
  for (const auto& r : rows) {
    if (!(std::abs(r.distance_mm) < window_mm) || !keep(r)) continue;
    const int k = signed_bin(r.distance_mm, bin_width_mm) + half;
    if (k < 0 || k >= 2 * half) continue;
    auto& c = counts[k];
    const int o = r.post_hk ? 2 : 0;
    ++c[o];
    c[o + 1] += r.incorrect;
  }
  std::vector<BinRate> out;
  for (int k = 0; k < 2 * half; ++k) {
    BinRate b;
    b.lo_mm = (k - half) * bin_width_mm;
    b.hi_mm = b.lo_mm + bin_width_mm;
    b.pre = make_rate(counts[k][1], counts[k][0]);
    b.post = make_rate(counts[k][3], counts[k][2]);
    out.push_back(b);
  }
  return out;
}

inline std::vector<BinRate> binned_mistake_rates(const std::vector<ConsolidatedRow>& rows,
                                                 double bin_width_mm = 20.0,
                                                 double window_mm = 100.0) {
  return binned_mistake_rates(rows, [](const ConsolidatedRow&) { return true; }, bin_width_mm,
                              window_mm);
}

/// Mistake rate over |d| < window_mm in one period.
inline RateEstimate pooled_mistake_rate(const std::vector<ConsolidatedRow>& rows, bool post,
                                        double window_mm) {
  std::int64_t n = 0, e = 0;
  for (const auto& r : rows)
    if (r.post_hk == post && std::abs(r.distance_mm) < window_mm) {
      ++n;
      e += r.incorrect;
    }
  return make_rate(e, n);
}

struct OlsFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se_classical;
  Eigen::VectorXd se_robust;
  Eigen::VectorXd se_cluster;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd cov_cluster;
  std::int64_t n_obs = 0;
  std::int64_t n_clusters = 0;

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }
};

/// OLS by column-pivoted QR. Classical, heteroskedasticity-robust (scaled by
/// n/(n-1)) and cluster-robust (scaled by G/(G-1)) covariances.
inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::int64_t>& clusters, std::vector<std::string> names) {
  const auto n = X.rows(), k = X.cols();
  if (static_cast<std::size_t>(k) != names.size() || y.size() != n ||
      static_cast<Eigen::Index>(clusters.size()) != n)
    throw InvalidInput("design matrix, outcome and cluster sizes disagree");
  if (n <= k) throw NumericalError(fmt::format("{} observations for {} regressors", n, k));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i)
      cols += (cols.empty() ? "" : ", ") + names[perm[i]];
    throw NumericalError(fmt::format("design matrix is rank deficient ({} of {}); drop: {}",
                                     qr.rank(), k, cols));
  }
  OlsFit f;
  f.names = std::move(names);
  f.n_obs = n;
  f.beta = qr.solve(y);
  f.residuals = y - X * f.beta;
  const Eigen::MatrixXd bread =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const double s2 = f.residuals.squaredNorm() / static_cast<double>(n - k);
  f.se_classical = (s2 * bread.diagonal()).cwiseSqrt();

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd g = X.row(i).transpose() * f.residuals[i];
    meat += g * g.transpose();
  }
  const double nn = static_cast<double>(n);
  f.se_robust = (nn / (nn - 1.0) * bread * meat * bread).diagonal().cwiseSqrt();

  std::map<std::int64_t, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, fresh] = scores.try_emplace(clusters[i], Eigen::VectorXd::Zero(k));
    it->second += X.row(i).transpose() * f.residuals[i];
  }
  f.n_clusters = static_cast<std::int64_t>(scores.size());
  Eigen::MatrixXd cmeat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, g] : scores) cmeat += g * g.transpose();
  const double G = static_cast<double>(f.n_clusters);
  if (f.n_clusters >= 2) {
    f.cov_cluster = G / (G - 1.0) * bread * cmeat * bread;
    f.se_cluster = f.cov_cluster.diagonal().cwiseSqrt();
  } else {
    f.cov_cluster = Eigen::MatrixXd::Constant(k, k, std::nan(""));
    f.se_cluster = Eigen::VectorXd::Constant(k, std::nan(""));
  }
  return f;
}

/// Controls of the incorrect-call regression. Fixed-effect families are
/// dummy encoded with the lowest level dropped.
struct RegressionSpec {
  bool distance_bin_fe = true;
  double bin_width_mm = 20.0;
  bool speed_above_median = true;
  bool score_fe = true;
  bool game_fe = true;
  bool set_fe = true;
  bool tiebreak = true;
  bool round_fe = true;
  bool tier_fe = true;
};

struct RegressionResult {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double alpha1_se_cluster = 0.0;
  OlsFit fit;
  std::int64_t n_obs = 0;
  /// Mean of the outcome in the pre-oversight period.
  double baseline_mean = 0.0;

  double alpha1_pp() const { return 100.0 * alpha1; }
};

namespace detail {

/// Tiebreak scores mapped onto regular-game labels by capping at 40.
inline std::string score_level(const ConsolidatedRow& r) {
  if (!r.tiebreak) return r.score;
  const auto dash = r.score.find('-');
  if (dash == std::string::npos) return r.score;
  static const char* names[] = {"0", "15", "30", "40"};
  auto cap = [&](const std::string& t) {
    int v = 0;
    try {
      v = std::stoi(t);
    } catch (...) {
      return std::string("?");
    }
    return std::string(names[std::clamp(v, 0, 3)]);
  };
  return cap(r.score.substr(0, dash)) + "-" + cap(r.score.substr(dash + 1));
}

struct DesignBuilder {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  void add(std::string name, std::vector<double> col) {
    names.push_back(std::move(name));
    cols.push_back(std::move(col));
  }

  template <class Key>
  void add_dummies(const std::string& family, const std::vector<Key>& keys) {
    std::map<Key, int> levels;
    for (const auto& k : keys) levels.emplace(k, 0);
    if (levels.size() < 2) return;
    levels.erase(levels.begin());
    for (auto& [level, unused] : levels) {
      std::vector<double> col(keys.size());
      for (std::size_t i = 0; i < keys.size(); ++i) col[i] = keys[i] == level ? 1.0 : 0.0;
      add(fmt::format("{}[{}]", family, level), std::move(col));
    }
  }

  Eigen::MatrixXd matrix(std::size_t n) const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      for (std::size_t i = 0; i < n; ++i) X(i, j) = cols[j][i];
    return X;
  }
};

inline void add_controls(DesignBuilder& d, const RegressionSpec& spec,
                         const std::vector<ConsolidatedRow>& rows, bool bins) {
  const std::size_t n = rows.size();
  if (bins && spec.distance_bin_fe) {
    std::vector<int> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = signed_bin(rows[i].distance_mm, spec.bin_width_mm);
    d.add_dummies("bin", k);
  }
  if (spec.speed_above_median) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = rows[i].speed_kmh;
    auto tmp = s;
    std::nth_element(tmp.begin(), tmp.begin() + n / 2, tmp.end());
    double median = tmp[n / 2];
    if (n % 2 == 0) median = 0.5 * (median + *std::max_element(tmp.begin(), tmp.begin() + n / 2));
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = s[i] > median ? 1.0 : 0.0;
    d.add("speed_above_median", std::move(col));
  }
  if (spec.score_fe) {
    std::vector<std::string> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = score_level(rows[i]);
    d.add_dummies("score", k);
  }
  if (spec.game_fe) {
    std::vector<int> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = std::min(rows[i].game, 12);
    d.add_dummies("game", k);
  }
  if (spec.set_fe) {
    std::vector<int> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = rows[i].set;
    d.add_dummies("set", k);
  }
  if (spec.tiebreak) {
    std::vector<double> col(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any |= (col[i] = rows[i].tiebreak ? 1.0 : 0.0) > 0.0;
    if (any) d.add("tiebreak", std::move(col));
  }
  if (spec.round_fe) {
    std::vector<int> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = rows[i].round;
    d.add_dummies("round", k);
  }
  if (spec.tier_fe) {
    std::vector<int> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = rows[i].tier;
    d.add_dummies("tier", k);
  }
}

inline Eigen::VectorXd outcome(const std::vector<ConsolidatedRow>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = rows[i].incorrect ? 1.0 : 0.0;
  return y;
}

inline std::vector<std::int64_t> match_clusters(const std::vector<ConsolidatedRow>& rows) {
  std::vector<std::int64_t> c(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) c[i] = rows[i].match_id;
  return c;
}

}  // namespace detail

/// 1(incorrect) = a0 + a1 PostHK + controls + e, errors clustered by match.
inline RegressionResult ols_fixed_effects(const RegressionSpec& spec,
                                          const std::vector<ConsolidatedRow>& rows) {
  if (rows.empty()) throw InvalidInput("regression sample is empty");
  const std::size_t n = rows.size();
  detail::DesignBuilder d;
  d.add("intercept", std::vector<double>(n, 1.0));
  std::vector<double> post(n);
  for (std::size_t i = 0; i < n; ++i) post[i] = rows[i].post_hk ? 1.0 : 0.0;
  d.add("post_hk", std::move(post));
  detail::add_controls(d, spec, rows, true);
  RegressionResult r;
  r.fit = ols(d.matrix(n), detail::outcome(rows), detail::match_clusters(rows), d.names);
  r.alpha0 = r.fit.beta[0];
  r.alpha1 = r.fit.beta[1];
  r.alpha1_se_cluster = r.fit.se_cluster[1];
  r.n_obs = static_cast<std::int64_t>(n);
  double sum = 0.0;
  std::int64_t m = 0;
  for (const auto& row : rows)
    if (!row.post_hk) {
      sum += row.incorrect;
      ++m;
    }
  r.baseline_mean = m ? sum / static_cast<double>(m) : std::nan("");
  return r;
}

struct BinEffect {
  double lo_mm = 0.0;
  double hi_mm = 0.0;
  double coef = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// PostHK x bin coefficients for every signed bin (no PostHK main effect),
/// with bin fixed effects and the remaining controls, 95% intervals from the
/// cluster-robust errors.
inline std::vector<BinEffect> interaction_by_bin(const RegressionSpec& spec,
                                                 const std::vector<ConsolidatedRow>& rows,
                                                 double window_mm = 100.0) {
  if (rows.empty()) throw InvalidInput("regression sample is empty");
  const std::size_t n = rows.size();
  detail::DesignBuilder d;
  d.add("intercept", std::vector<double>(n, 1.0));
  RegressionSpec with_bins = spec;
  with_bins.distance_bin_fe = true;
  const int half = static_cast<int>(std::lround(window_mm / spec.bin_width_mm));
  std::vector<int> present;
  for (int k = -half; k < half; ++k) {
    std::vector<double> col(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = rows[i].post_hk && signed_bin(rows[i].distance_mm, spec.bin_width_mm) == k;
      any |= col[i] > 0.0;
    }
    if (!any) continue;
    d.add(fmt::format("post_hk:bin[{}]", k), std::move(col));
    present.push_back(k);
  }
  detail::add_controls(d, with_bins, rows, true);
  const auto fit = ols(d.matrix(n), detail::outcome(rows), detail::match_clusters(rows), d.names);
  std::vector<BinEffect> out;
  for (std::size_t j = 0; j < present.size(); ++j) {
    BinEffect e;
    e.lo_mm = present[j] * spec.bin_width_mm;
    e.hi_mm = e.lo_mm + spec.bin_width_mm;
    e.coef = fit.beta[1 + j];
    e.se = fit.se_cluster[1 + j];
    e.ci_lo = e.coef - 1.96 * e.se;
    e.ci_hi = e.coef + 1.96 * e.se;
    out.push_back(e);
  }
  return out;
}

struct TournamentRate {
  std::int64_t tournament_id = 0;
  double month = 0.0;
  bool post_hk = false;
  std::int64_t n = 0;
  double rate = 0.0;
};

struct TrendResult {
  std::vector<TournamentRate> tournaments;
  /// Weighted least-squares fit over post-period tournaments, in p.p. per month.
  std::optional<double> slope_pp_per_month;
  std::optional<double> slope_se;
  std::optional<double> intercept_pp;
  std::optional<double> pre_mean;
  std::optional<double> pre_ci_lo;
  std::optional<double> pre_ci_hi;
};

/// Per-tournament call-in rates for |d| < window_mm and their trend.
inline TrendResult callin_rate_trend(const std::vector<ConsolidatedRow>& rows,
                                     double window_mm = 20.0) {
  std::map<std::int64_t, TournamentRate> by_t;
  std::map<std::int64_t, std::int64_t> calls_in;
  for (const auto& r : rows) {
    if (!(std::abs(r.distance_mm) < window_mm)) continue;
    auto& t = by_t[r.tournament_id];
    t.tournament_id = r.tournament_id;
    t.month = r.month;
    t.post_hk = r.post_hk;
    ++t.n;
    calls_in[r.tournament_id] += r.call_in;
  }
  TrendResult res;
  std::int64_t pre_n = 0, pre_in = 0;
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n_post = 0;
  for (auto& [id, t] : by_t) {
    t.rate = static_cast<double>(calls_in[id]) / static_cast<double>(t.n);
    res.tournaments.push_back(t);
    if (!t.post_hk) {
      pre_n += t.n;
      pre_in += calls_in[id];
      continue;
    }
    const double w = static_cast<double>(t.n), x = t.month, y = 100.0 * t.rate;
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++n_post;
  }
  if (pre_n > 0) {
    const double p = static_cast<double>(pre_in) / static_cast<double>(pre_n);
    const double h = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(pre_n));
    res.pre_mean = p;
    res.pre_ci_lo = p - h;
    res.pre_ci_hi = p + h;
  }
  const double den = sw * sxx - sx * sx;
  if (n_post >= 2 && den > 0.0) {
    const double slope = (sw * sxy - sx * sy) / den;
    const double icpt = (sy - slope * sx) / sw;
    res.slope_pp_per_month = slope;
    res.intercept_pp = icpt;
    if (n_post > 2) {
      double rss = 0.0;
      for (const auto& t : res.tournaments) {
        if (!t.post_hk) continue;
        const double e = 100.0 * t.rate - icpt - slope * t.month;
        rss += static_cast<double>(t.n) * e * e;
      }
      const double sigma2 = rss / (n_post - 2);
      res.slope_se = std::sqrt(sigma2 * sw / den);
    }
  }
  return res;
}

inline std::string regression_table_text(const RegressionResult& r, const std::string& title) {
  std::ostringstream os;
  os << title << "\n";
  os << fmt::format("  {:<28}{:>12}{:>12}{:>12}{:>12}\n", "term", "coef", "se", "se_hc",
                    "se_cluster");
  for (std::size_t i = 0; i < r.fit.names.size(); ++i) {
    os << fmt::format("  {:<28}{:>12.5f}{:>12.5f}{:>12.5f}{:>12.5f}\n", r.fit.names[i],
                      r.fit.beta[i], r.fit.se_classical[i], r.fit.se_robust[i],
                      r.fit.se_cluster[i]);
  }
  os << fmt::format("  {:<28}{:>12}\n", "observations", r.n_obs);
  os << fmt::format("  {:<28}{:>12}\n", "clusters", r.fit.n_clusters);
  os << fmt::format("  {:<28}{:>12.5f}\n", "baseline mean", r.baseline_mean);
  os << fmt::format("  {:<28}{:>12.3f}\n", "PostHK effect (p.p.)", r.alpha1_pp());
  return os.str();
}

inline std::string regression_table_csv(const RegressionResult& r) {
  std::ostringstream os;
  os << "term,coef,se_classical,se_hc,se_cluster\n";
  for (std::size_t i = 0; i < r.fit.names.size(); ++i)
    os << fmt::format("{},{:.8f},{:.8f},{:.8f},{:.8f}\n", r.fit.names[i], r.fit.beta[i],
                      r.fit.se_classical[i], r.fit.se_robust[i], r.fit.se_cluster[i]);
  os << fmt::format("n_obs,{},,,\nbaseline_mean,{:.8f},,,\n", r.n_obs, r.baseline_mean);
  return os.str();
}

inline std::string bin_rates_csv(const std::vector<BinRate>& bins) {
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string();
  };
  std::ostringstream os;
  os << "bin_lo_mm,bin_hi_mm,pre_n,pre_rate,pre_se,post_n,post_rate,post_se\n";
  for (const auto& b : bins)
    os << fmt::format("{},{},{},{},{},{},{},{}\n", b.lo_mm, b.hi_mm, b.pre.n, opt(b.pre.rate),
                      opt(b.pre.se), b.post.n, opt(b.post.rate), opt(b.post.se));
  return os.str();
}

inline std::string bin_effects_csv(const std::vector<BinEffect>& effects) {
  std::ostringstream os;
  os << "bin_lo_mm,bin_hi_mm,coef,se_cluster,ci_lo,ci_hi\n";
  for (const auto& e : effects)
    os << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", e.lo_mm, e.hi_mm, e.coef, e.se,
                      e.ci_lo, e.ci_hi);
  return os.str();
}

inline std::string trend_csv(const TrendResult& t) {
  std::ostringstream os;
  os << "tournament_id,month,post_hk,n,callin_rate\n";
  for (const auto& r : t.tournaments)
    os << fmt::format("{},{},{},{},{:.6f}\n", r.tournament_id, r.month, r.post_hk ? 1 : 0, r.n,
                      r.rate);
  return os.str();
}

}  // namespace oversight
