#pragma once

// Challenge-to-bounce record linkage in eight passes of decreasing
// strictness, restoration of the umpire's original calls, and the four
// rule-based criteria that detect unchallenged incorrect calls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "oversight/match_simulator.hpp"

namespace oversight {

struct LinkPair {
  std::int64_t challenge_id = 0;
  std::int64_t bounce_id = 0;
  int iteration = 0;
};

struct PassMetrics {
  int linked = 0;
  int correct = 0;
  int false_positive = 0;
};

struct LinkMetrics {
  int n_challenges = 0;
  int n_linked = 0;
  double merge_rate = 0.0;
  std::optional<int> n_correct;
  std::optional<double> false_positive_rate;
  std::array<PassMetrics, 8> per_pass{};
};

struct LinkResult {
  std::vector<LinkPair> pairs;
  std::vector<std::int64_t> unmatched;
  LinkMetrics metrics;
};

/// Fields a pass compares. `Unique` passes leave ambiguous challenges for
/// later passes; the others pick the closest candidate.
struct LinkPass {
  bool set = false, game = false, score = false, player = false, tiebreak_only = false;
  double max_diff_mm = 0.0;
  enum class Pick { Unique, ClosestDistance, ClosestScoreThenDistance } pick = Pick::Unique;
};

inline const std::array<LinkPass, 8>& link_passes() {
  using P = LinkPass::Pick;
  static const std::array<LinkPass, 8> passes{{
      {true, true, true, true, false, 35.0, P::Unique},
      {true, true, false, true, false, 15.0, P::Unique},
      {true, false, true, true, false, 15.0, P::Unique},
      {false, true, true, true, false, 10.0, P::Unique},
      {false, true, true, false, true, 35.0, P::Unique},
      {false, true, false, false, true, 15.0, P::ClosestDistance},
      {true, true, false, true, false, 35.0, P::ClosestScoreThenDistance},
      {true, false, false, true, false, 35.0, P::ClosestDistance},
  }};
  return passes;
}

namespace detail {

/// (server points, receiver points) on a common scale; regular-game labels
/// map to 0..4, tiebreak scores are taken as numbers.
inline std::optional<std::array<int, 2>> parse_score(const std::string& s, bool tiebreak) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) return std::nullopt;
  auto token = [&](const std::string& t) -> std::optional<int> {
    if (tiebreak) {
      try {
        return std::stoi(t);
      } catch (...) {
        return std::nullopt;
      }
    }
    if (t == "0") return 0;
    if (t == "15") return 1;
    if (t == "30") return 2;
    if (t == "40") return 3;
    if (t == "AD") return 4;
    return std::nullopt;
  };
  const auto a = token(s.substr(0, dash)), b = token(s.substr(dash + 1));
  if (!a || !b) return std::nullopt;
  return std::array<int, 2>{*a, *b};
}

/// L1 distance between scores, taking the smaller of the recorded score and
/// its mirror image since challenge logs often swap the players.
inline double score_distance(const std::optional<std::string>& challenge, const PointRecord& p) {
  if (!challenge) return std::numeric_limits<double>::infinity();
  const auto a = parse_score(*challenge, p.tiebreak), b = parse_score(p.score, p.tiebreak);
  if (!a || !b) return std::numeric_limits<double>::infinity();
  const int direct = std::abs((*a)[0] - (*b)[0]) + std::abs((*a)[1] - (*b)[1]);
  const int mirrored = std::abs((*a)[1] - (*b)[0]) + std::abs((*a)[0] - (*b)[1]);
  return std::min(direct, mirrored);
}

inline std::unordered_map<std::int64_t, const PointRecord*> index_points(
    const std::vector<PointRecord>& points) {
  std::unordered_map<std::int64_t, const PointRecord*> m;
  m.reserve(points.size());
  for (const auto& p : points) m.emplace(p.point_id, &p);
  return m;
}

}  // namespace detail

/// Links each challenge to at most one bounce. `disabled_passes` switches
/// passes off (1-based) for ablations. With `truth`, correctness metrics are
/// filled in.
inline LinkResult link_challenges(const std::vector<BounceEvent>& bounces,
                                  const std::vector<PointRecord>& points,
                                  const std::vector<ChallengeRecord>& challenges,
                                  const std::vector<TruthLink>* truth = nullptr,
                                  const std::set<int>& disabled_passes = {}) {
  const auto point_of = detail::index_points(points);
  std::map<std::int64_t, std::vector<const BounceEvent*>> by_match;
  for (const auto& b : bounces) by_match[b.match_id].push_back(&b);
  for (auto& [m, v] : by_match)
    std::sort(v.begin(), v.end(),
              [](const BounceEvent* a, const BounceEvent* b) { return a->bounce_id < b->bounce_id; });

  std::vector<const ChallengeRecord*> order;
  for (const auto& c : challenges) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const ChallengeRecord* a, const ChallengeRecord* b) {
    return a->challenge_id < b->challenge_id;
  });

  std::set<std::int64_t> used_bounces;
  std::map<std::int64_t, LinkPair> linked;
  const auto& passes = link_passes();
  for (int k = 0; k < 8; ++k) {
    if (disabled_passes.count(k + 1)) continue;
    const auto& pass = passes[k];
    for (const ChallengeRecord* c : order) {
      if (linked.count(c->challenge_id)) continue;
      if (pass.set && !c->set) continue;
      if (pass.game && !c->game) continue;
      if (pass.score && !c->score) continue;
      if (pass.tiebreak_only && !c->tiebreak) continue;
      const auto it = by_match.find(c->match_id);
      if (it == by_match.end()) continue;

      const BounceEvent* best = nullptr;
      int n_candidates = 0;
      double best_score = 0.0, best_diff = 0.0;
      for (const BounceEvent* b : it->second) {
        if (used_bounces.count(b->bounce_id)) continue;
        const auto pit = point_of.find(b->point_id);
        if (pit == point_of.end()) continue;
        const PointRecord& p = *pit->second;
        if (pass.tiebreak_only && !p.tiebreak) continue;
        if (pass.set && p.set != *c->set) continue;
        if (pass.game && p.game != *c->game) continue;
        if (pass.score && p.score != *c->score) continue;
        if (pass.player && b->hitter != c->player) continue;
        const double diff = std::abs(std::abs(b->distance_mm) - c->distance_mm);
        if (!(diff < pass.max_diff_mm)) continue;
        ++n_candidates;
        const double sd =
            pass.pick == LinkPass::Pick::ClosestScoreThenDistance ? detail::score_distance(c->score, p)
                                                                  : 0.0;
        if (!best || sd < best_score || (sd == best_score && diff < best_diff)) {
          best = b;
          best_score = sd;
          best_diff = diff;
        }
      }
      if (!best) continue;
      if (pass.pick == LinkPass::Pick::Unique && n_candidates > 1) continue;
      linked[c->challenge_id] = {c->challenge_id, best->bounce_id, k + 1};
      used_bounces.insert(best->bounce_id);
    }
  }

  LinkResult r;
  for (const ChallengeRecord* c : order) {
    const auto it = linked.find(c->challenge_id);
    if (it == linked.end())
      r.unmatched.push_back(c->challenge_id);
    else
      r.pairs.push_back(it->second);
  }
  auto& m = r.metrics;
  m.n_challenges = static_cast<int>(challenges.size());
  m.n_linked = static_cast<int>(r.pairs.size());
  m.merge_rate = m.n_challenges ? static_cast<double>(m.n_linked) / m.n_challenges : 0.0;
  for (const auto& p : r.pairs) ++m.per_pass[p.iteration - 1].linked;
  if (truth) {
    std::unordered_map<std::int64_t, std::int64_t> expected;
    for (const auto& t : *truth) expected[t.challenge_id] = t.bounce_id;
    int correct = 0;
    for (const auto& p : r.pairs) {
      const auto it = expected.find(p.challenge_id);
      const bool ok = it != expected.end() && it->second == p.bounce_id;
      correct += ok;
      ++(ok ? m.per_pass[p.iteration - 1].correct : m.per_pass[p.iteration - 1].false_positive);
    }
    m.n_correct = correct;
    m.false_positive_rate =
        m.n_linked ? static_cast<double>(m.n_linked - correct) / m.n_linked : 0.0;
  }
  return r;
}

/// Inverts the call of every bounce linked to a won challenge, recovering
/// the umpire's ruling before review.
inline std::vector<BounceEvent> restore_original_calls(
    const std::vector<BounceEvent>& bounces, const LinkResult& links,
    const std::vector<ChallengeRecord>& challenges) {
  std::unordered_map<std::int64_t, bool> won;
  for (const auto& c : challenges) won[c.challenge_id] = c.won;
  std::unordered_map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < bounces.size(); ++i) pos[bounces[i].bounce_id] = i;
  auto out = bounces;
  for (const auto& p : links.pairs) {
    const auto w = won.find(p.challenge_id);
    if (w == won.end() || !w->second) continue;
    const auto it = pos.find(p.bounce_id);
    if (it == pos.end()) continue;
    auto& b = out[it->second];
    b.call = b.call == Action::CallIn ? Action::CallOut : Action::CallIn;
  }
  return out;
}

struct AuditFlag {
  std::int64_t point_id = 0;
  std::int64_t bounce_id = 0;
  int stroke_index = 0;
  int criterion = 0;
  Action inferred_original_call = Action::CallIn;
};

struct CriterionMetrics {
  int flagged = 0;
  int truth = 0;
  int true_positive = 0;
  double precision() const { return flagged ? static_cast<double>(true_positive) / flagged : 1.0; }
  double recall() const { return truth ? static_cast<double>(true_positive) / truth : 1.0; }
};

struct CallAudit {
  std::vector<AuditFlag> flagged;
  /// Filled by `score_audit` against generator truth.
  std::optional<std::array<CriterionMetrics, 4>> metrics;
};

inline constexpr double kCriterion4WindowMm = 40.0;
inline constexpr int kCriterion2MinStrokes = 3;

/// Applies the four criteria to every point. Only distances, stroke order,
/// serve flags, hitters and point winners are used; calls are not.
inline CallAudit identify_incorrect_calls(const std::vector<PointRecord>& points,
                                          const std::vector<BounceEvent>& bounces) {
  std::map<std::int64_t, std::vector<const BounceEvent*>> strokes;
  for (const auto& b : bounces) strokes[b.point_id].push_back(&b);
  std::vector<const PointRecord*> order;
  for (const auto& p : points) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const PointRecord* a, const PointRecord* b) { return a->point_id < b->point_id; });

  CallAudit audit;
  for (const PointRecord* p : order) {
    auto it = strokes.find(p->point_id);
    if (it == strokes.end()) continue;
    auto& s = it->second;
    std::sort(s.begin(), s.end(), [](const BounceEvent* a, const BounceEvent* b) {
      return a->stroke_index < b->stroke_index;
    });
    auto flag = [&](const BounceEvent* b, int crit, Action inferred) {
      audit.flagged.push_back({p->point_id, b->bounce_id, b->stroke_index, crit, inferred});
    };

    std::size_t first_serve = s.size(), last_serve = s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i]->is_serve) {
        if (first_serve == s.size()) first_serve = i;
        last_serve = i;
      }
    const std::size_t live = last_serve == s.size() ? 0 : last_serve;

    std::size_t first_out = s.size();
    for (std::size_t i = live; i < s.size(); ++i)
      if (s[i]->distance_mm < 0.0) {
        first_out = i;
        break;
      }
    if (first_out < s.size()) {
      const BounceEvent* b = s[first_out];
      const std::size_t after = s.size() - 1 - first_out;
      if (b->hitter == p->winner)
        flag(b, 1, Action::CallIn);
      else if (after >= static_cast<std::size_t>(kCriterion2MinStrokes))
        flag(b, 2, Action::CallIn);
    } else if (s.back()->hitter != p->winner && live < s.size()) {
      flag(s.back(), 3, Action::CallOut);
    }

    if (first_serve < last_serve) {
      const BounceEvent* b = s[first_serve];
      if (b->distance_mm >= 0.0 && b->distance_mm <= kCriterion4WindowMm)
        flag(b, 4, Action::CallOut);
    }
  }
  return audit;
}

/// Precision and recall per criterion against the generator's labels.
inline void score_audit(CallAudit& audit, const std::vector<BounceEvent>& bounces) {
  std::array<CriterionMetrics, 4> m{};
  std::set<std::pair<std::int64_t, int>> truth;
  for (const auto& b : bounces)
    if (b.truth_criterion >= 1 && b.truth_criterion <= 4) {
      truth.insert({b.bounce_id, b.truth_criterion});
      ++m[b.truth_criterion - 1].truth;
    }
  for (const auto& f : audit.flagged) {
    ++m[f.criterion - 1].flagged;
    if (truth.count({f.bounce_id, f.criterion})) ++m[f.criterion - 1].true_positive;
  }
  audit.metrics = m;
}

}  // namespace oversight
