#pragma once

// CSV readers and writers for the event logs and choice data. Every file
// starts with a header row; readers locate columns by name and reject
// missing columns or malformed values with DataFormatError.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oversight/choice_data.hpp"
#include "oversight/errors.hpp"
#include "oversight/match_simulator.hpp"
#include "oversight/structural_estimation.hpp"

namespace oversight::io {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError(fmt::format("cannot write '{}'", path));
  out << content;
  if (!out) throw DataFormatError(fmt::format("failed writing '{}'", path));
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

/// Parsed CSV with named-column access.
class Table {
 public:
  Table(const std::string& text, std::string source) : source_(std::move(source)) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataFormatError(fmt::format("{}: empty file", source_));
    header_ = split(line);
    for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto fields = split(line);
      if (fields.size() != header_.size()) {
        throw DataFormatError(fmt::format("{}:{}: expected {} fields, found {}", source_, lineno,
                                          header_.size(), fields.size()));
      }
      rows_.push_back(std::move(fields));
      lines_.push_back(lineno);
    }
  }

  static Table load(const std::string& path) { return Table(read_file(path), path); }

  std::size_t size() const { return rows_.size(); }
  bool has(const std::string& col) const { return index_.count(col) > 0; }

  const std::string& raw(std::size_t row, const std::string& col) const {
    const auto it = index_.find(col);
    if (it == index_.end()) throw DataFormatError(fmt::format("{}: missing column '{}'", source_, col));
    return rows_[row][it->second];
  }

  double real(std::size_t row, const std::string& col) const {
    const auto& s = raw(row, col);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(row, col, s);
    return v;
  }

  std::int64_t integer(std::size_t row, const std::string& col) const {
    const auto& s = raw(row, col);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(row, col, s);
    return v;
  }

  std::optional<std::int64_t> optional_integer(std::size_t row, const std::string& col) const {
    if (raw(row, col).empty()) return std::nullopt;
    return integer(row, col);
  }

  bool flag(std::size_t row, const std::string& col) const {
    const auto v = integer(row, col);
    if (v != 0 && v != 1) fail(row, col, raw(row, col));
    return v == 1;
  }

  State state(std::size_t row, const std::string& col) const {
    const auto& s = raw(row, col);
    if (s == "in") return State::In;
    if (s == "out") return State::Out;
    fail(row, col, s);
  }

  Action action(std::size_t row, const std::string& col) const {
    const auto& s = raw(row, col);
    if (s == "in") return Action::CallIn;
    if (s == "out") return Action::CallOut;
    fail(row, col, s);
  }

 private:
  [[noreturn]] void fail(std::size_t row, const std::string& col, const std::string& v) const {
    throw DataFormatError(
        fmt::format("{}:{}: bad value '{}' in column '{}'", source_, lines_[row], v, col));
  }

  std::string source_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

// Observed columns first, generator truth columns after `call`.
inline constexpr const char* kBounceHeader =
    "bounce_id,tournament_id,match_id,point_id,stroke_index,hitter,is_serve,distance_mm,"
    "speed_kmh,true_state,call,original_call,challenged,challenge_won,is_let,truth_criterion";
inline constexpr const char* kPointHeader =
    "point_id,tournament_id,match_id,set,game,score,tiebreak,server,winner,post_hk,month,tier,"
    "round";
inline constexpr const char* kChallengeHeader =
    "challenge_id,tournament_id,match_id,set,game,score,tiebreak,player,distance_mm,outcome";
inline constexpr const char* kTruthHeader = "challenge_id,bounce_id";

inline std::string bounces_csv(const std::vector<BounceEvent>& v) {
  std::string s = std::string(kBounceHeader) + "\n";
  for (const auto& b : v)
    s += fmt::format("{},{},{},{},{},{},{},{:.3f},{:.2f},{},{},{},{},{},{},{}\n", b.bounce_id,
                     b.tournament_id, b.match_id, b.point_id, b.stroke_index, b.hitter,
                     int(b.is_serve), b.distance_mm, b.speed_kmh, to_string(b.true_state),
                     to_string(b.call), to_string(b.original_call), int(b.challenged),
                     int(b.challenge_won), int(b.is_let), b.truth_criterion);
  return s;
}

inline std::vector<BounceEvent> parse_bounces(const Table& t) {
  std::vector<BounceEvent> v;
  v.reserve(t.size());
  const bool truth = t.has("original_call");
  for (std::size_t i = 0; i < t.size(); ++i) {
    BounceEvent b;
    b.bounce_id = t.integer(i, "bounce_id");
    b.tournament_id = t.integer(i, "tournament_id");
    b.match_id = t.integer(i, "match_id");
    b.point_id = t.integer(i, "point_id");
    b.stroke_index = static_cast<int>(t.integer(i, "stroke_index"));
    b.hitter = static_cast<int>(t.integer(i, "hitter"));
    b.is_serve = t.flag(i, "is_serve");
    b.distance_mm = t.real(i, "distance_mm");
    b.speed_kmh = t.real(i, "speed_kmh");
    b.true_state = b.distance_mm >= 0.0 ? State::In : State::Out;
    if (t.has("true_state") && t.state(i, "true_state") != b.true_state) {
      throw DataFormatError(
          fmt::format("bounce {}: true_state disagrees with distance sign", b.bounce_id));
    }
    b.call = t.action(i, "call");
    b.original_call = truth ? t.action(i, "original_call") : b.call;
    if (truth) {
      b.challenged = t.flag(i, "challenged");
      b.challenge_won = t.flag(i, "challenge_won");
      b.is_let = t.flag(i, "is_let");
      b.truth_criterion = static_cast<int>(t.integer(i, "truth_criterion"));
    }
    v.push_back(b);
  }
  return v;
}

inline std::string points_csv(const std::vector<PointRecord>& v) {
  std::string s = std::string(kPointHeader) + "\n";
  for (const auto& p : v)
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", p.point_id, p.tournament_id,
                     p.match_id, p.set, p.game, p.score, int(p.tiebreak), p.server, p.winner,
                     int(p.post_hk), p.month, p.tier, p.round);
  return s;
}

inline std::vector<PointRecord> parse_points(const Table& t) {
  std::vector<PointRecord> v;
  v.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    PointRecord p;
    p.point_id = t.integer(i, "point_id");
    p.tournament_id = t.integer(i, "tournament_id");
    p.match_id = t.integer(i, "match_id");
    p.set = static_cast<int>(t.integer(i, "set"));
    p.game = static_cast<int>(t.integer(i, "game"));
    p.score = t.raw(i, "score");
    p.tiebreak = t.flag(i, "tiebreak");
    p.server = static_cast<int>(t.integer(i, "server"));
    p.winner = static_cast<int>(t.integer(i, "winner"));
    p.post_hk = t.flag(i, "post_hk");
    p.month = t.real(i, "month");
    p.tier = static_cast<int>(t.integer(i, "tier"));
    p.round = static_cast<int>(t.integer(i, "round"));
    v.push_back(p);
  }
  return v;
}

inline std::string challenges_csv(const std::vector<ChallengeRecord>& v) {
  auto opt = [](const auto& o) { return o ? fmt::format("{}", *o) : std::string(); };
  std::string s = std::string(kChallengeHeader) + "\n";
  for (const auto& c : v)
    s += fmt::format("{},{},{},{},{},{},{},{},{:.3f},{}\n", c.challenge_id, c.tournament_id,
                     c.match_id, opt(c.set), opt(c.game), opt(c.score), int(c.tiebreak), c.player,
                     c.distance_mm, c.won ? "won" : "lost");
  return s;
}

inline std::vector<ChallengeRecord> parse_challenges(const Table& t) {
  std::vector<ChallengeRecord> v;
  v.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    ChallengeRecord c;
    c.challenge_id = t.integer(i, "challenge_id");
    c.tournament_id = t.integer(i, "tournament_id");
    c.match_id = t.integer(i, "match_id");
    if (auto s = t.optional_integer(i, "set")) c.set = static_cast<int>(*s);
    if (auto g = t.optional_integer(i, "game")) c.game = static_cast<int>(*g);
    if (!t.raw(i, "score").empty()) c.score = t.raw(i, "score");
    c.tiebreak = t.flag(i, "tiebreak");
    c.player = static_cast<int>(t.integer(i, "player"));
    c.distance_mm = t.real(i, "distance_mm");
    const auto& o = t.raw(i, "outcome");
    if (o != "won" && o != "lost")
      throw DataFormatError(fmt::format("challenge {}: outcome must be won|lost", c.challenge_id));
    c.won = o == "won";
    v.push_back(c);
  }
  return v;
}

inline std::string truth_csv(const std::vector<TruthLink>& v) {
  std::string s = std::string(kTruthHeader) + "\n";
  for (const auto& t : v) s += fmt::format("{},{}\n", t.challenge_id, t.bounce_id);
  return s;
}

inline std::vector<TruthLink> parse_truth(const Table& t) {
  std::vector<TruthLink> v;
  for (std::size_t i = 0; i < t.size(); ++i)
    v.push_back({t.integer(i, "challenge_id"), t.integer(i, "bounce_id")});
  return v;
}

/// Choice data as rows of action,state,probability with an optional count
/// column; counts, when present, take precedence.
inline std::string choice_data_csv(const ChoiceData& d) {
  std::string s = d.counts ? "action,state,probability,count\n" : "action,state,probability\n";
  for (Action a : kActions)
    for (State st : kStates) {
      s += fmt::format("{},{},{:.12g}", to_string(a), to_string(st), d(a, st));
      if (d.counts) s += fmt::format(",{}", (*d.counts)[index(a)][index(st)]);
      s += "\n";
    }
  return s;
}

inline ChoiceData parse_choice_data(const Table& t, ChoiceRegime regime) {
  if (t.size() != 4) throw DataFormatError("choice data needs exactly four rows");
  std::array<std::array<bool, 2>, 2> seen{};
  ChoiceData d;
  CellCounts c{};
  const bool counts = t.has("count");
  for (std::size_t i = 0; i < 4; ++i) {
    const int a = index(t.action(i, "action")), s = index(t.state(i, "state"));
    if (seen[a][s]) throw DataFormatError("choice data repeats a cell");
    seen[a][s] = true;
    if (counts) c[a][s] = t.integer(i, "count");
    else d.joint[a][s] = t.real(i, "probability");
  }
  try {
    if (counts) return ChoiceData::from_counts(c, regime);
    d.regime = regime;
    d.validate();
  } catch (const InvalidInput& e) {
    throw DataFormatError(e.what());
  }
  return d;
}

/// Revealed posteriors given directly, one row with columns
/// gamma_in_in,gamma_out_out.
inline std::optional<RevealedPosteriors> parse_posteriors(const Table& t) {
  if (!t.has("gamma_in_in") || !t.has("gamma_out_out")) return std::nullopt;
  if (t.size() != 1) throw DataFormatError("posterior file needs exactly one data row");
  RevealedPosteriors rp{t.real(0, "gamma_in_in"), t.real(0, "gamma_out_out")};
  if (!(rp.in_given_call_in >= 0.0 && rp.in_given_call_in <= 1.0 &&
        rp.out_given_call_out >= 0.0 && rp.out_given_call_out <= 1.0))
    throw DataFormatError("posteriors must lie in [0,1]");
  return rp;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace oversight::io
