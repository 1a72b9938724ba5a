#pragma once

// Run configuration: an INI file with one section per stage. Every key is
// registered once with its documentation, so the same table drives parsing,
// validation of unknown keys and `--print-config`.

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "oversight/errors.hpp"
#include "oversight/match_simulator.hpp"
#include "oversight/structural_estimation.hpp"

namespace oversight {

struct SolveSettings {
  double prior_in = 0.5;
  AttentionCost kappa{1.0, 1.0};
  double eta_in = 0.0, eta_out = 0.0, c_in = 0.0, c_out = 0.0;
  std::string method = "ilr";
};

struct EstimateSettings {
  EstimationConvention convention = EstimationConvention::AsPrinted;
  std::optional<double> eta_in;
  std::optional<double> eta_out;
};

struct BoundsSettings {
  double c_out_min = -3.0;
  double c_out_max = 0.0;
  int c_out_points = 31;
};

struct ReportSettings {
  double window_mm = 100.0;
  double trend_window_mm = 20.0;
};

struct RoundtripSettings {
  /// Recovery passes when |estimate - truth| <= max_se standard errors.
  double max_se = 3.0;
};

struct RunConfig {
  SimConfig sim;
  SolveSettings solve;
  EstimateSettings estimate;
  BoundsSettings bounds;
  ReportSettings report;
  RoundtripSettings roundtrip;

  /// Round-trip friendly defaults: one parameter set shared by all bins,
  /// interior in both periods, typical log corruption.
  static RunConfig defaults() {
    RunConfig c;
    c.sim.bins.assign(5, BinModel{{1.2, 0.8}, -1.5, -0.5, 0.4, 0.4});
    c.sim.matches_per_tournament = 24;
    c.sim.corruption = CorruptionSpec::typical();
    return c;
  }
};

namespace detail {

inline std::string prefix(const std::string& key) { return key.empty() ? "" : key + ": "; }

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}'{}' is not a number", prefix(key), v));
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}'{}' is not an integer", prefix(key), v));
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}'{}' is not a boolean", prefix(key), v));
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError(fmt::format("{}empty list entry", prefix(key)));
    out.push_back(parse_real(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}empty list", prefix(key)));
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt::format("{}", v[i]);
  return s;
}

/// Bin lists are written and read column-wise; one value applies to all bins.
template <class Get>
std::vector<double> bin_column(const SimConfig& s, Get get) {
  std::vector<double> v;
  for (const auto& b : s.bins) v.push_back(get(b));
  bool same = true;
  for (double x : v) same &= x == v.front();
  if (same && !v.empty()) v.resize(1);
  return v;
}

template <class Set>
void set_bin_column(SimConfig& s, const std::string& key, const std::vector<double>& v, Set set) {
  if (v.size() != 1 && v.size() != s.bins.size()) {
    throw ConfigError(fmt::format("{}expected 1 or {} values, found {}", prefix(key), s.bins.size(),
                                  v.size()));
  }
  for (std::size_t i = 0; i < s.bins.size(); ++i) set(s.bins[i], v.size() == 1 ? v[0] : v[i]);
}

}  // namespace detail

struct ConfigKey {
  std::string section;
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  auto real = [](auto member) {
    return std::make_pair(
        std::function<std::string(const RunConfig&)>(
            [member](const RunConfig& c) { return fmt::format("{}", member(const_cast<RunConfig&>(c))); }),
        std::function<void(RunConfig&, const std::string&)>(
            [member](RunConfig& c, const std::string& v) { member(c) = parse_real("", v); }));
  };
  auto integer = [](auto member) {
    return std::make_pair(
        std::function<std::string(const RunConfig&)>(
            [member](const RunConfig& c) { return fmt::format("{}", member(const_cast<RunConfig&>(c))); }),
        std::function<void(RunConfig&, const std::string&)>([member](RunConfig& c, const std::string& v) {
          using T = std::remove_reference_t<decltype(member(c))>;
          member(c) = static_cast<T>(parse_int("", v));
        }));
  };
  auto boolean = [](auto member) {
    return std::make_pair(
        std::function<std::string(const RunConfig&)>(
            [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)) ? "true" : "false"; }),
        std::function<void(RunConfig&, const std::string&)>(
            [member](RunConfig& c, const std::string& v) { member(c) = parse_bool("", v); }));
  };
  auto column = [](auto field) {
    return std::make_pair(
        std::function<std::string(const RunConfig&)>([field](const RunConfig& c) {
          return format_list(bin_column(c.sim, [&](const BinModel& b) { return field(const_cast<BinModel&>(b)); }));
        }),
        std::function<void(RunConfig&, const std::string&)>([field](RunConfig& c, const std::string& v) {
          set_bin_column(c.sim, "", parse_list("", v), [&](BinModel& b, double x) { field(b) = x; });
        }));
  };
  auto entry = [](std::string sec, std::string key, std::string doc, auto accessors) {
    return ConfigKey{std::move(sec), std::move(key), std::move(doc), accessors.first,
                     accessors.second};
  };

  static const std::vector<ConfigKey> keys = [&] {
    std::vector<ConfigKey> k;
    const std::string S = "simulation", D = "distance", B = "bins", C = "corruption";
    k.push_back(entry(S, "master_seed", "seed of every random stream",
                      integer([](RunConfig& c) -> auto& { return c.sim.master_seed; })));
    k.push_back(entry(S, "n_tournaments_pre", "tournaments without challenges",
                      integer([](RunConfig& c) -> auto& { return c.sim.n_tournaments_pre; })));
    k.push_back(entry(S, "n_tournaments_post", "tournaments with challenges",
                      integer([](RunConfig& c) -> auto& { return c.sim.n_tournaments_post; })));
    k.push_back(entry(S, "matches_per_tournament", "matches per tournament",
                      integer([](RunConfig& c) -> auto& { return c.sim.matches_per_tournament; })));
    k.push_back(entry(S, "months_per_tournament", "months between consecutive tournaments",
                      real([](RunConfig& c) -> auto& { return c.sim.months_per_tournament; })));
    k.push_back(entry(S, "phase_in_months",
                      "months over which penalties move from -1 to their values (0 = at once)",
                      real([](RunConfig& c) -> auto& { return c.sim.phase_in_months; })));
    k.push_back(entry(S, "bin_width_mm", "width of the distance bins",
                      real([](RunConfig& c) -> auto& { return c.sim.bin_width_mm; })));
    k.push_back(entry(S, "p_winner", "chance a ball in play ends the point as a winner",
                      real([](RunConfig& c) -> auto& { return c.sim.p_winner; })));
    k.push_back(entry(S, "serve_share", "target share of serves among bounces (reported only)",
                      real([](RunConfig& c) -> auto& { return c.sim.serve_share; })));
    k.push_back(entry(S, "lets_enabled", "replay some first serves that landed in",
                      boolean([](RunConfig& c) -> auto& { return c.sim.lets_enabled; })));
    k.push_back(entry(S, "let_rate", "share of in first serves that are lets",
                      real([](RunConfig& c) -> auto& { return c.sim.let_rate; })));
    k.push_back(entry(S, "unsuccessful_challenge_rate",
                      "rate of challenges on correct calls near the line",
                      real([](RunConfig& c) -> auto& { return c.sim.unsuccessful_challenge_rate; })));
    k.push_back(entry(S, "threads", "worker threads",
                      integer([](RunConfig& c) -> auto& { return c.sim.threads; })));
    k.push_back(entry(D, "exp_weight", "weight of the two-sided exponential component",
                      real([](RunConfig& c) -> auto& { return c.sim.distance.exp_weight; })));
    k.push_back(entry(D, "exp_scale_mm", "scale of the exponential component",
                      real([](RunConfig& c) -> auto& { return c.sim.distance.exp_scale_mm; })));
    k.push_back(entry(D, "exp_in_share", "share of the exponential component inside the line",
                      real([](RunConfig& c) -> auto& { return c.sim.distance.exp_in_share; })));
    k.push_back(entry(D, "uniform_lo_mm", "lower end of the uniform component",
                      real([](RunConfig& c) -> auto& { return c.sim.distance.uniform_lo_mm; })));
    k.push_back(entry(D, "uniform_hi_mm", "upper end of the uniform component",
                      real([](RunConfig& c) -> auto& { return c.sim.distance.uniform_hi_mm; })));
    k.push_back(ConfigKey{
        B, "count", "number of bins; lists below take 1 value or one per bin",
        [](const RunConfig& c) { return fmt::format("{}", c.sim.bins.size()); },
        [](RunConfig& c, const std::string& v) {
          const auto n = parse_int("bins.count", v);
          if (n < 1 || n > 100) throw ConfigError("bins.count must lie in [1, 100]");
          c.sim.bins.resize(static_cast<std::size_t>(n), c.sim.bins.back());
        }});
    k.push_back(entry(B, "kappa_in", "attention cost, in state",
                      column([](BinModel& b) -> auto& { return b.kappa.kappa_in; })));
    k.push_back(entry(B, "kappa_out", "attention cost, out state",
                      column([](BinModel& b) -> auto& { return b.kappa.kappa_out; })));
    k.push_back(entry(B, "c_in", "oversight penalty for overturned in-state mistakes",
                      column([](BinModel& b) -> auto& { return b.c_in; })));
    k.push_back(entry(B, "c_out", "oversight penalty for overturned out-state mistakes",
                      column([](BinModel& b) -> auto& { return b.c_out; })));
    k.push_back(entry(B, "eta_in", "challenge rate of in-state mistakes",
                      column([](BinModel& b) -> auto& { return b.eta_in; })));
    k.push_back(entry(B, "eta_out", "challenge rate of out-state mistakes",
                      column([](BinModel& b) -> auto& { return b.eta_out; })));
    k.push_back(entry(C, "score_flip", "chance the recorded score is mirrored",
                      real([](RunConfig& c) -> auto& { return c.sim.corruption.p_score_flip; })));
    k.push_back(entry(C, "missing_set", "chance the set is missing",
                      real([](RunConfig& c) -> auto& { return c.sim.corruption.p_missing_set; })));
    k.push_back(entry(C, "missing_game", "chance the game is missing",
                      real([](RunConfig& c) -> auto& { return c.sim.corruption.p_missing_game; })));
    k.push_back(entry(C, "distance_noise_mm", "s.d. of the measured challenge distance",
                      real([](RunConfig& c) -> auto& { return c.sim.corruption.distance_noise_mm; })));
    const std::string V = "solve";
    k.push_back(entry(V, "prior_in", "prior probability the ball is in",
                      real([](RunConfig& c) -> auto& { return c.solve.prior_in; })));
    k.push_back(entry(V, "kappa_in", "attention cost, in state",
                      real([](RunConfig& c) -> auto& { return c.solve.kappa.kappa_in; })));
    k.push_back(entry(V, "kappa_out", "attention cost, out state",
                      real([](RunConfig& c) -> auto& { return c.solve.kappa.kappa_out; })));
    k.push_back(entry(V, "eta_in", "challenge rate, in state (0 = no challenges)",
                      real([](RunConfig& c) -> auto& { return c.solve.eta_in; })));
    k.push_back(entry(V, "eta_out", "challenge rate, out state",
                      real([](RunConfig& c) -> auto& { return c.solve.eta_out; })));
    k.push_back(entry(V, "c_in", "oversight penalty, in state",
                      real([](RunConfig& c) -> auto& { return c.solve.c_in; })));
    k.push_back(entry(V, "c_out", "oversight penalty, out state",
                      real([](RunConfig& c) -> auto& { return c.solve.c_out; })));
    k.push_back(ConfigKey{V, "method", "ilr | exact",
                          [](const RunConfig& c) { return c.solve.method; },
                          [](RunConfig& c, const std::string& v) {
                            if (v != "ilr" && v != "exact")
                              throw ConfigError("solve.method must be ilr or exact");
                            c.solve.method = v;
                          }});
    const std::string E = "estimate";
    k.push_back(ConfigKey{E, "convention", "printed | table",
                          [](const RunConfig& c) { return std::string(to_string(c.estimate.convention)); },
                          [](RunConfig& c, const std::string& v) {
                            try {
                              c.estimate.convention = parse_convention(v);
                            } catch (const InvalidInput& e) {
                              throw ConfigError(e.what());
                            }
                          }});
    auto opt_real = [](auto member) {
      return std::make_pair(
          std::function<std::string(const RunConfig&)>([member](const RunConfig& c) {
            const auto& o = member(const_cast<RunConfig&>(c));
            return o ? fmt::format("{}", *o) : std::string();
          }),
          std::function<void(RunConfig&, const std::string&)>([member](RunConfig& c, const std::string& v) {
            if (v.empty()) member(c).reset();
            else member(c) = parse_real("", v);
          }));
    };
    k.push_back(entry(E, "eta_in", "challenge rate, in state (empty = measured from the data)",
                      opt_real([](RunConfig& c) -> auto& { return c.estimate.eta_in; })));
    k.push_back(entry(E, "eta_out", "challenge rate, out state (empty = measured from the data)",
                      opt_real([](RunConfig& c) -> auto& { return c.estimate.eta_out; })));
    const std::string BO = "bounds";
    k.push_back(entry(BO, "c_out_min", "left end of the c_out grid",
                      real([](RunConfig& c) -> auto& { return c.bounds.c_out_min; })));
    k.push_back(entry(BO, "c_out_max", "right end of the c_out grid",
                      real([](RunConfig& c) -> auto& { return c.bounds.c_out_max; })));
    k.push_back(entry(BO, "c_out_points", "grid points",
                      integer([](RunConfig& c) -> auto& { return c.bounds.c_out_points; })));
    const std::string R = "report";
    k.push_back(entry(R, "window_mm", "distance window of the regressions and bin rates",
                      real([](RunConfig& c) -> auto& { return c.report.window_mm; })));
    k.push_back(entry(R, "trend_window_mm", "distance window of the call-in trend",
                      real([](RunConfig& c) -> auto& { return c.report.trend_window_mm; })));
    k.push_back(entry("roundtrip", "max_se", "largest accepted recovery error in standard errors",
                      real([](RunConfig& c) -> auto& { return c.roundtrip.max_se; })));
    return k;
  }();
  return keys;
}

/// Canonical INI text; with `docs`, each key is preceded by its comment.
inline std::string config_to_ini(const RunConfig& c, bool docs = true) {
  std::string out, section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out += fmt::format("{}[{}]\n", section.empty() ? "" : "\n", k.section);
      section = k.section;
    }
    if (docs) out += fmt::format("; {}\n", k.doc);
    out += fmt::format("{} = {}\n", k.key, k.get(c));
  }
  return out;
}

inline void apply_ini(RunConfig& c, const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.message()));
  }
  const auto& keys = config_keys();
  // bins.count first so that bin lists see the final size.
  auto apply = [&](const std::string& sec, const std::string& key, const std::string& value) {
    for (const auto& k : keys)
      if (k.section == sec && k.key == key) {
        try {
          k.set(c, value);
        } catch (const ConfigError& e) {
          throw ConfigError(fmt::format("{}: [{}] {}: {}", source, sec, key, e.what()));
        }
        return;
      }
    throw ConfigError(fmt::format("{}: unknown key [{}] {}", source, sec, key));
  };
  for (const auto& [sec, sub] : tree) {
    if (sub.empty()) throw ConfigError(fmt::format("{}: key '{}' outside a section", source, sec));
    if (auto n = sub.get_optional<std::string>("count"); n && sec == "bins") apply(sec, "count", *n);
  }
  for (const auto& [sec, sub] : tree)
    for (const auto& [key, node] : sub) {
      if (sec == "bins" && key == "count") continue;
      apply(sec, key, node.data());
    }
  c.sim.validate();
}

inline RunConfig load_config(const std::optional<std::string>& path) {
  RunConfig c = RunConfig::defaults();
  if (!path) return c;
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", *path));
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_ini(c, ss.str(), *path);
  return c;
}

}  // namespace oversight
