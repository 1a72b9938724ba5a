#pragma once

// Synthetic tournament logs generated from the attention model.
//
// Every bounce draws a signed distance (negative = out). Bounces within
// `window_mm` of the line are called by the bin's optimal information
// structure; everything further away is called correctly. A point ends at
// the first ball that stays called out, after a winner, or after a missed
// out ball plays on. Only one mistake can happen per live rally, which keeps
// the audit criteria exhaustive on lets-free corpora:
//
//   out ball called in, play continues r in {0, 2, 3, ...} strokes, the last
//   hitter wins          -> criterion 1 (r even) or criterion 2 (r odd)
//   in ball called out during the rally or on a second serve
//                        -> criterion 3
//   in first serve called out within 40 mm
//                        -> criterion 4

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "oversight/attention_solver.hpp"
#include "oversight/choice_data.hpp"
#include "oversight/core_model.hpp"
#include "oversight/errors.hpp"

namespace oversight {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream `k` of `master`.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t k) {
  return splitmix64(splitmix64(master) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

/// Mixture of a two-sided exponential centred on the line and a uniform
/// component over the court.
struct DistanceLaw {
  double exp_weight = 0.23;
  double exp_scale_mm = 1000.0;
  double exp_in_share = 0.53;
  double uniform_lo_mm = -1500.0;
  double uniform_hi_mm = 10000.0;

  void validate() const {
    if (!(exp_weight >= 0.0 && exp_weight <= 1.0) || !(exp_in_share >= 0.0 && exp_in_share <= 1.0))
      throw ConfigError("distance law weights must lie in [0,1]");
    if (!(exp_scale_mm > 0.0)) throw ConfigError("distance law scale must be positive");
    if (!(uniform_lo_mm < 0.0) || !(uniform_hi_mm > 0.0))
      throw ConfigError("uniform component must straddle the line");
  }

  template <class Rng>
  double sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < exp_weight) {
      const double mag = std::exponential_distribution<double>(1.0 / exp_scale_mm)(rng);
      return u(rng) < exp_in_share ? mag : -mag;
    }
    return uniform_lo_mm + (uniform_hi_mm - uniform_lo_mm) * u(rng);
  }

  /// Probability mass of a <= |d| < b on the in side (d >= 0) and out side.
  std::array<double, 2> side_mass(double a, double b) const {
    const double e = exp_weight * (std::exp(-a / exp_scale_mm) - std::exp(-b / exp_scale_mm));
    const double width = uniform_hi_mm - uniform_lo_mm;
    auto overlap = [](double lo, double hi, double l2, double h2) {
      return std::max(0.0, std::min(hi, h2) - std::max(lo, l2));
    };
    const double u_in = (1.0 - exp_weight) * overlap(a, b, 0.0, uniform_hi_mm) / width;
    const double u_out = (1.0 - exp_weight) * overlap(a, b, 0.0, -uniform_lo_mm) / width;
    return {exp_in_share * e + u_in, (1.0 - exp_in_share) * e + u_out};
  }

  double share_within(double a) const {
    const auto m = side_mass(0.0, a);
    return m[0] + m[1];
  }

  /// In-share among bounces with a <= |d| < b.
  double in_share(double a, double b) const {
    const auto m = side_mass(a, b);
    return m[0] / (m[0] + m[1]);
  }
};

/// Attention cost and oversight parameters of one distance bin.
struct BinModel {
  AttentionCost kappa{1.0, 1.0};
  double c_in = -1.0;
  double c_out = -1.0;
  double eta_in = 0.4;
  double eta_out = 0.4;
};

struct CorruptionSpec {
  double p_score_flip = 0.0;
  double p_missing_set = 0.0;
  double p_missing_game = 0.0;
  double distance_noise_mm = 0.0;

  static CorruptionSpec none() { return {}; }
  /// A missing field on 15% of records, split evenly between set and game.
  static CorruptionSpec typical() { return {0.3, 0.075, 0.075, 5.0}; }

  bool active() const {
    return p_score_flip > 0.0 || p_missing_set > 0.0 || p_missing_game > 0.0 ||
           distance_noise_mm > 0.0;
  }

  void validate() const {
    for (double p : {p_score_flip, p_missing_set, p_missing_game})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("corruption probabilities must lie in [0,1]");
    if (!(distance_noise_mm >= 0.0)) throw ConfigError("distance noise must be non-negative");
  }
};

struct SimConfig {
  std::uint64_t master_seed = 20240101;
  int n_tournaments_pre = 12;
  int n_tournaments_post = 12;
  int matches_per_tournament = 16;
  DistanceLaw distance;
  double bin_width_mm = 20.0;
  /// One entry per bin, innermost first; bins cover [0, bins.size() * width).
  std::vector<BinModel> bins = std::vector<BinModel>(5);
  /// Calibration target only; the realised share follows from point play.
  double serve_share = 0.28;
  double p_winner = 0.12;
  bool lets_enabled = false;
  double let_rate = 0.05;
  /// Rate at which correct calls inside the window are challenged (and lost).
  double unsuccessful_challenge_rate = 0.0;
  /// Months over which post-period penalties move linearly from -1 (no
  /// effect) to their configured values. Zero switches them on at once.
  double phase_in_months = 0.0;
  double months_per_tournament = 1.0;
  int threads = 1;
  CorruptionSpec corruption;

  double window_mm() const { return bin_width_mm * static_cast<double>(bins.size()); }

  void validate() const {
    if (n_tournaments_pre < 0 || n_tournaments_post < 0 || matches_per_tournament <= 0 ||
        n_tournaments_pre + n_tournaments_post <= 0)
      throw ConfigError("tournament and match counts must be positive");
    if (bins.empty()) throw ConfigError("at least one distance bin is required");
    if (!(bin_width_mm > 0.0)) throw ConfigError("bin width must be positive");
    distance.validate();
    corruption.validate();
    for (double p : {serve_share, p_winner, let_rate, unsuccessful_challenge_rate})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("simulation probabilities must lie in [0,1]");
    if (!(p_winner > 0.0)) throw ConfigError("p_winner must be positive");
    if (phase_in_months < 0.0 || !(months_per_tournament > 0.0))
      throw ConfigError("phase-in and tournament spacing must be non-negative");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    for (const auto& b : bins) {
      try {
        b.kappa.validate();
        UtilityEnvironment::with_challenges(b.eta_in, b.eta_out, b.c_in, b.c_out);
      } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
      }
    }
  }

  /// Field-estimated attention costs, challenge rates and penalties: the
  /// innermost bin uses the <20 mm estimates, the others the 20-100 mm ones.
  /// Costs are printed-convention inversions of the estimated posteriors so
  /// that the simulated umpire is interior.
  static SimConfig reference_calibrated() {
    SimConfig c;
    c.bins.assign(5, BinModel{{0.425580, 0.427460}, -1.337, -1.079, 0.479, 0.421});
    c.bins[0] = BinModel{{1.1392003726090598, 1.5937671605225379}, -2.003, -0.088, 0.427, 0.410};
    return c;
  }
};

struct BounceEvent {
  std::int64_t bounce_id = 0;
  std::int64_t tournament_id = 0;
  std::int64_t match_id = 0;
  std::int64_t point_id = 0;
  int stroke_index = 0;
  int hitter = 0;
  double distance_mm = 0.0;
  bool is_serve = false;
  double speed_kmh = 0.0;
  State true_state = State::In;
  /// Final ruling after any challenge.
  Action call = Action::CallIn;
  // Generator truth below; not observable in real logs.
  Action original_call = Action::CallIn;
  bool challenged = false;
  bool challenge_won = false;
  bool is_let = false;
  /// Audit criterion (1-4) the generator expects to fire on this bounce, 0 if none.
  int truth_criterion = 0;

  bool original_mistake() const { return matching_action(true_state) != original_call; }
};

struct PointRecord {
  std::int64_t point_id = 0;
  std::int64_t tournament_id = 0;
  std::int64_t match_id = 0;
  int set = 1;
  int game = 1;
  /// Server perspective; "40-40"/"AD-40" after deuce, numeric in tiebreaks.
  std::string score;
  bool tiebreak = false;
  int server = 0;
  int winner = 0;
  bool post_hk = false;
  double month = 0.0;
  int tier = 0;
  int round = 1;
};

struct ChallengeRecord {
  std::int64_t challenge_id = 0;
  std::int64_t tournament_id = 0;
  std::int64_t match_id = 0;
  std::optional<int> set;
  std::optional<int> game;
  std::optional<std::string> score;
  bool tiebreak = false;
  /// Player whose shot was challenged.
  int player = 0;
  /// Unsigned distance as measured at review time.
  double distance_mm = 0.0;
  bool won = false;
};

struct TruthLink {
  std::int64_t challenge_id = 0;
  std::int64_t bounce_id = 0;
};

struct SimOutput {
  std::vector<BounceEvent> bounces;
  std::vector<PointRecord> points;
  std::vector<ChallengeRecord> challenges;           // as written, after corruption
  std::vector<ChallengeRecord> pristine_challenges;  // before corruption
  std::vector<TruthLink> truth;
};

/// Per-state call probabilities of one bin in one regime.
struct CallPolicy {
  std::array<double, 2> p_call_in{1.0, 0.0};  // indexed by true state
  Regime regime = Regime::Interior;
};

inline CallPolicy call_policy(const SolverSolution& s) {
  CallPolicy p;
  p.regime = s.regime;
  const auto& d = s.choice_probs;
  for (State st : kStates) {
    const double m = d.state_marginal(st);
    p.p_call_in[index(st)] = m > 0.0 ? d(Action::CallIn, st) / m : (st == State::In ? 1.0 : 0.0);
  }
  return p;
}

/// Penalties scale linearly from -1 towards their targets over the phase-in.
inline UtilityEnvironment post_environment(const BinModel& b, double months_since_start,
                                           double phase_in_months) {
  double f = 1.0;
  if (phase_in_months > 0.0) f = std::clamp(months_since_start / phase_in_months, 0.0, 1.0);
  return UtilityEnvironment::with_challenges(b.eta_in, b.eta_out, -1.0 + f * (b.c_in + 1.0),
                                             -1.0 + f * (b.c_out + 1.0));
}

inline Prior bin_prior(const SimConfig& cfg, std::size_t bin) {
  const double a = cfg.bin_width_mm * static_cast<double>(bin);
  return Prior::from_in(cfg.distance.in_share(a, a + cfg.bin_width_mm));
}

/// Optimal solutions for every bin in one regime.
inline std::vector<SolverSolution> bin_solutions(const SimConfig& cfg, bool post,
                                                 double months_since_start = 1e300) {
  std::vector<SolverSolution> out;
  for (std::size_t i = 0; i < cfg.bins.size(); ++i) {
    const auto env = post ? post_environment(cfg.bins[i], months_since_start, cfg.phase_in_months)
                          : UtilityEnvironment::no_oversight();
    out.push_back(solve_optimal_structure(env, cfg.bins[i].kappa, bin_prior(cfg, i)));
  }
  return out;
}

/// `n` independent (state, call) draws straight from a solution's choice
/// probabilities, bypassing point play.
template <class Rng>
ChoiceData simulate_bounce_sample(const SolverSolution& s, std::int64_t n, Rng& rng) {
  if (n <= 0) throw InvalidInput("sample size must be positive");
  CellCounts c{};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& p = s.choice_probs.joint;
  const double c0 = p[0][0], c1 = c0 + p[0][1], c2 = c1 + p[1][0];
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = u(rng);
    if (v < c0) ++c[0][0];
    else if (v < c1) ++c[0][1];
    else if (v < c2) ++c[1][0];
    else ++c[1][1];
  }
  return ChoiceData::from_counts(c, s.choice_probs.regime);
}

namespace detail {

struct TournamentInfo {
  std::int64_t id = 0;
  bool post = false;
  double month = 0.0;
  int tier = 0;
  std::vector<CallPolicy> policies;
};

struct MatchLog {
  std::vector<BounceEvent> bounces;
  std::vector<PointRecord> points;
  std::vector<ChallengeRecord> challenges;
  std::vector<std::size_t> challenge_bounce;  // index into bounces
};

/// Simplified scoring: best of three sets, tiebreak at 6-6.
class Scoreboard {
 public:
  explicit Scoreboard(int first_server) : first_server_(first_server) {}

  bool finished() const { return sets_[0] == 2 || sets_[1] == 2; }
  int set() const { return sets_[0] + sets_[1] + 1; }
  int game() const { return games_[0] + games_[1] + 1; }
  bool tiebreak() const { return games_[0] == 6 && games_[1] == 6; }

  int server() const {
    const int games_played = total_games_;
    int s = (first_server_ + games_played) % 2;
    if (tiebreak()) {
      const int n = points_[0] + points_[1];
      if (((n + 1) / 2) % 2 == 1) s = 1 - s;
    }
    return s;
  }

  std::string score() const {
    const int s = server(), r = 1 - s;
    const int ps = points_[s], pr = points_[r];
    if (tiebreak()) return fmt::format("{}-{}", ps, pr);
    if (ps >= 3 && pr >= 3) {
      if (ps == pr) return "40-40";
      return ps > pr ? "AD-40" : "40-AD";
    }
    static const char* names[] = {"0", "15", "30", "40"};
    return fmt::format("{}-{}", names[ps], names[pr]);
  }

  void award(int winner) {
    ++points_[winner];
    const int loser = 1 - winner;
    const int target = tiebreak() ? 7 : 4;
    if (points_[winner] >= target && points_[winner] - points_[loser] >= 2) {
      const bool was_tb = tiebreak();
      points_ = {0, 0};
      ++games_[winner];
      ++total_games_;
      const int gw = games_[winner], gl = games_[loser];
      if ((gw >= 6 && gw - gl >= 2) || was_tb) {
        ++sets_[winner];
        games_ = {0, 0};
      }
    }
  }

 private:
  int first_server_;
  int total_games_ = 0;
  std::array<int, 2> points_{0, 0};
  std::array<int, 2> games_{0, 0};
  std::array<int, 2> sets_{0, 0};
};

template <class Rng>
class MatchSimulator {
 public:
  MatchSimulator(const SimConfig& cfg, const TournamentInfo& t, std::int64_t match_id, int round,
                 Rng& rng)
      : cfg_(cfg), t_(t), match_id_(match_id), round_(round), rng_(rng) {}

  MatchLog run() {
    Scoreboard board(static_cast<int>(uniform() < 0.5));
    std::int64_t point_no = 0;
    while (!board.finished()) {
      PointRecord pr;
      pr.point_id = point_no++;
      pr.tournament_id = t_.id;
      pr.match_id = match_id_;
      pr.set = board.set();
      pr.game = board.game();
      pr.score = board.score();
      pr.tiebreak = board.tiebreak();
      pr.server = board.server();
      pr.post_hk = t_.post;
      pr.month = t_.month;
      pr.tier = t_.tier;
      pr.round = round_;
      current_ = &pr;
      stroke_ = 0;
      pr.winner = play_point(pr.server);
      log_.points.push_back(pr);
      board.award(pr.winner);
    }
    return std::move(log_);
  }

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  BounceEvent& add_bounce(int hitter, double d, bool serve) {
    BounceEvent b;
    b.tournament_id = t_.id;
    b.match_id = match_id_;
    b.point_id = current_->point_id;
    b.stroke_index = stroke_++;
    b.hitter = hitter;
    b.distance_mm = d;
    b.is_serve = serve;
    const double mean = serve ? 150.0 : 83.0, sd = serve ? 23.0 : 20.5;
    b.speed_kmh = std::max(0.0, std::normal_distribution<double>(mean, sd)(rng_));
    b.true_state = d >= 0.0 ? State::In : State::Out;
    log_.bounces.push_back(b);
    return log_.bounces.back();
  }

  Action draw_call(double d) {
    const State st = d >= 0.0 ? State::In : State::Out;
    const double mag = std::abs(d);
    if (mag >= cfg_.window_mm()) return matching_action(st);
    const auto bin = std::min(cfg_.bins.size() - 1,
                              static_cast<std::size_t>(mag / cfg_.bin_width_mm));
    return uniform() < t_.policies[bin].p_call_in[index(st)] ? Action::CallIn : Action::CallOut;
  }

  void record_challenge(std::size_t idx, bool won) {
    auto& b = log_.bounces[idx];
    b.challenged = true;
    b.challenge_won = won;
    ChallengeRecord c;
    c.tournament_id = t_.id;
    c.match_id = match_id_;
    c.set = current_->set;
    c.game = current_->game;
    c.score = current_->score;
    c.tiebreak = current_->tiebreak;
    c.player = b.hitter;
    c.distance_mm = std::abs(b.distance_mm);
    c.won = won;
    log_.challenges.push_back(c);
    log_.challenge_bounce.push_back(idx);
  }

  /// Whether the mistake at bounce `idx` is challenged and overturned.
  bool challenge_mistake(std::size_t idx) {
    if (!t_.post) return false;
    const auto& b = log_.bounces[idx];
    const double eta = b.true_state == State::In ? bin_of(b).eta_in : bin_of(b).eta_out;
    if (uniform() >= eta) return false;
    record_challenge(idx, true);
    auto& bb = log_.bounces[idx];
    bb.call = matching_action(bb.true_state);
    return true;
  }

  void maybe_unsuccessful_challenge(std::size_t idx) {
    if (!t_.post || cfg_.unsuccessful_challenge_rate <= 0.0) return;
    if (std::abs(log_.bounces[idx].distance_mm) >= cfg_.window_mm()) return;
    if (uniform() < cfg_.unsuccessful_challenge_rate) record_challenge(idx, false);
  }

  const BinModel& bin_of(const BounceEvent& b) const {
    const auto bin = std::min(cfg_.bins.size() - 1,
                              static_cast<std::size_t>(std::abs(b.distance_mm) / cfg_.bin_width_mm));
    return cfg_.bins[bin];
  }

  /// Plays out a missed out ball: r further strokes, all well in, and the
  /// last hitter wins. r = 1 never happens.
  int continue_after_missed_out(std::size_t idx, int hitter) {
    int r = 0;
    if (uniform() >= 0.4) r = 2 + std::geometric_distribution<int>(0.4)(rng_);
    log_.bounces[idx].truth_criterion = r % 2 == 0 ? 1 : 2;
    int h = hitter;
    for (int k = 0; k < r; ++k) {
      h = 1 - h;
      auto& b = add_bounce(h, 200.0 + 9800.0 * uniform(), false);
      b.call = b.original_call = Action::CallIn;
    }
    return h;
  }

  /// Resolves one called bounce. Returns the point winner, or -1 if play goes
  /// on (ball in and called in). `fault` is set when a first serve stays out.
  int resolve(int hitter, double d, bool serve, int serve_no, bool& fault) {
    fault = false;
    const Action call = draw_call(d);
    const std::size_t idx = log_.bounces.size();
    {
      auto& b = add_bounce(hitter, d, serve);
      b.call = b.original_call = call;
    }
    const State st = d >= 0.0 ? State::In : State::Out;
    const int opp = 1 - hitter;
    if (call == matching_action(st)) {
      maybe_unsuccessful_challenge(idx);
      if (call == Action::CallIn) return -1;
      if (serve && serve_no == 1) {
        fault = true;
        return -1;
      }
      return opp;
    }
    if (challenge_mistake(idx)) return st == State::In ? hitter : opp;
    if (st == State::Out) return continue_after_missed_out(idx, hitter);
    // In ball called out.
    if (serve && serve_no == 1) {
      if (std::abs(d) <= 40.0) log_.bounces[idx].truth_criterion = 4;
      fault = true;
      return -1;
    }
    log_.bounces[idx].truth_criterion = 3;
    return opp;
  }

  int play_point(int server) {
    int serve_no = 1;
    for (;;) {
      const double d = cfg_.distance.sample(rng_);
      if (serve_no == 1 && cfg_.lets_enabled && d >= 0.0 && uniform() < cfg_.let_rate) {
        auto& b = add_bounce(server, d, true);
        b.call = b.original_call = Action::CallIn;
        b.is_let = true;
        continue;
      }
      bool fault = false;
      const int w = resolve(server, d, true, serve_no, fault);
      if (w >= 0) return w;
      if (fault) {
        serve_no = 2;
        continue;
      }
      break;
    }
    int last = server;
    for (;;) {
      if (uniform() < cfg_.p_winner) return last;
      const int hitter = 1 - last;
      bool fault = false;
      const int w = resolve(hitter, cfg_.distance.sample(rng_), false, 0, fault);
      if (w >= 0) return w;
      last = hitter;
    }
  }

  const SimConfig& cfg_;
  const TournamentInfo& t_;
  std::int64_t match_id_;
  int round_;
  Rng& rng_;
  MatchLog log_;
  PointRecord* current_ = nullptr;
  int stroke_ = 0;
};

inline std::string flip_score(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) return s;
  return s.substr(dash + 1) + "-" + s.substr(0, dash);
}

}  // namespace detail

/// Independent corruptions of set, game, score and measured distance. The
/// challenge ids, and with them the truth table, are left untouched.
inline std::vector<ChallengeRecord> corrupt_challenge_log(
    const std::vector<ChallengeRecord>& challenges, const CorruptionSpec& spec,
    std::uint64_t seed) {
  spec.validate();
  std::vector<ChallengeRecord> out = challenges;
  if (!spec.active()) return out;
  for (auto& c : out) {
    std::mt19937_64 rng(child_seed(seed, static_cast<std::uint64_t>(c.challenge_id)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (c.score && u(rng) < spec.p_score_flip) c.score = detail::flip_score(*c.score);
    if (u(rng) < spec.p_missing_set) c.set.reset();
    if (u(rng) < spec.p_missing_game) c.game.reset();
    if (spec.distance_noise_mm > 0.0) {
      const double noisy =
          c.distance_mm + std::normal_distribution<double>(0.0, spec.distance_noise_mm)(rng);
      c.distance_mm = std::max(0.0, noisy);
    }
  }
  return out;
}

/// Runs every tournament of the configuration. Output is sorted by
/// (tournament, match, point, stroke) and ids are assigned in that order, so
/// the result does not depend on `cfg.threads`.
inline SimOutput simulate(const SimConfig& cfg) {
  cfg.validate();
  const int n_t = cfg.n_tournaments_pre + cfg.n_tournaments_post;
  std::vector<detail::TournamentInfo> tournaments(n_t);
  for (int t = 0; t < n_t; ++t) {
    auto& ti = tournaments[t];
    ti.id = t;
    ti.post = t >= cfg.n_tournaments_pre;
    ti.month = cfg.months_per_tournament * t;
    ti.tier = t % 3;
    const double since = (t - cfg.n_tournaments_pre) * cfg.months_per_tournament;
    try {
      for (const auto& s : bin_solutions(cfg, ti.post, since)) ti.policies.push_back(call_policy(s));
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }

  const std::int64_t n_matches = static_cast<std::int64_t>(n_t) * cfg.matches_per_tournament;
  std::vector<detail::MatchLog> logs(n_matches);
  auto work = [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t m = begin; m < end; ++m) {
      std::mt19937_64 rng(child_seed(cfg.master_seed, static_cast<std::uint64_t>(m)));
      const auto& t = tournaments[m / cfg.matches_per_tournament];
      const int round = 1 + static_cast<int>(m % cfg.matches_per_tournament) % 5;
      logs[m] = detail::MatchSimulator<std::mt19937_64>(cfg, t, m, round, rng).run();
    }
  };
  const int nthreads = static_cast<int>(std::min<std::int64_t>(cfg.threads, n_matches));
  if (nthreads <= 1) {
    work(0, n_matches);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (n_matches + nthreads - 1) / nthreads;
    for (int i = 0; i < nthreads; ++i) {
      const std::int64_t b = i * chunk, e = std::min(n_matches, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  SimOutput out;
  std::int64_t next_point = 0;
  for (auto& log : logs) {
    const std::int64_t bounce_base = static_cast<std::int64_t>(out.bounces.size());
    const std::int64_t point_base = next_point;
    for (auto& p : log.points) {
      p.point_id += point_base;
      out.points.push_back(std::move(p));
    }
    next_point += static_cast<std::int64_t>(log.points.size());
    for (auto& b : log.bounces) {
      b.point_id += point_base;
      b.bounce_id = static_cast<std::int64_t>(out.bounces.size());
      out.bounces.push_back(b);
    }
    for (std::size_t i = 0; i < log.challenges.size(); ++i) {
      auto c = log.challenges[i];
      c.challenge_id = static_cast<std::int64_t>(out.pristine_challenges.size());
      out.truth.push_back(
          {c.challenge_id, bounce_base + static_cast<std::int64_t>(log.challenge_bounce[i])});
      out.pristine_challenges.push_back(std::move(c));
    }
  }
  out.challenges = corrupt_challenge_log(out.pristine_challenges, cfg.corruption,
                                         child_seed(cfg.master_seed, ~0ULL));
  return out;
}

}  // namespace oversight
