#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oversight/attention_solver.hpp"
#include "oversight/config.hpp"
#include "oversight/io.hpp"
#include "oversight/pipeline.hpp"

namespace fs = std::filesystem;
using namespace oversight;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Flags {
  std::optional<std::string> config;
  std::string out;
  std::string in;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> convention;
  std::optional<double> eta_in, eta_out;
  std::string pre, post;
};

RunConfig effective_config(const Flags& f) {
  RunConfig c = load_config(f.config);
  if (f.seed) c.sim.master_seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 1) throw ConfigError("--threads must be at least 1");
    c.sim.threads = *f.threads;
  }
  if (f.convention) {
    try {
      c.estimate.convention = parse_convention(*f.convention);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.eta_in) c.estimate.eta_in = f.eta_in;
  if (f.eta_out) c.estimate.eta_out = f.eta_out;
  return c;
}

std::string wall_clock() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"))
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  else
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Writes artifacts into `dir` together with manifest.json.
class OutputDir {
 public:
  OutputDir(std::string command, const std::string& dir, const RunConfig& cfg,
            std::vector<std::string> inputs)
      : command_(std::move(command)), dir_(dir), cfg_(cfg), inputs_(std::move(inputs)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataFormatError(fmt::format("cannot create '{}': {}", dir_, ec.message()));
  }

  void write(const std::string& name, const std::string& content) {
    io::write_file((fs::path(dir_) / name).string(), content);
    outputs_.push_back(name);
  }

  void finish() {
    nlohmann::json m;
    m["command"] = command_;
    m["config_hash"] = fmt::format("{:016x}", io::fnv1a(config_to_ini(cfg_, false)));
    m["master_seed"] = cfg_.sim.master_seed;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["artifact_version"] = kVersion;
    m["wall_clock"] = wall_clock();
    io::write_file((fs::path(dir_) / "manifest.json").string(), m.dump(2) + "\n");
  }

 private:
  std::string command_, dir_;
  RunConfig cfg_;
  std::vector<std::string> inputs_, outputs_;
};

struct Logs {
  std::vector<BounceEvent> bounces;
  std::vector<PointRecord> points;
  std::vector<ChallengeRecord> challenges;
  std::optional<std::vector<TruthLink>> truth;
  std::vector<std::string> paths;
};

Logs read_logs(const std::string& dir) {
  Logs l;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  l.bounces = io::parse_bounces(io::Table::load(path("bounces.csv")));
  l.points = io::parse_points(io::Table::load(path("points.csv")));
  l.challenges = io::parse_challenges(io::Table::load(path("challenges.csv")));
  l.paths = {path("bounces.csv"), path("points.csv"), path("challenges.csv")};
  if (fs::exists(path("truth.csv"))) {
    l.truth = io::parse_truth(io::Table::load(path("truth.csv")));
    l.paths.push_back(path("truth.csv"));
  }
  return l;
}

LogAnalysis analyse(const Logs& l, const RunConfig& cfg) {
  return analyse_logs(l.bounces, l.points, l.challenges, l.truth ? &*l.truth : nullptr,
                      std::max(cfg.sim.window_mm(), cfg.report.window_mm));
}

std::string bounds_csv(const std::vector<PenaltyBound>& bounds) {
  std::string s = "source,intercept,slope,direction\n";
  for (const auto& b : bounds)
    s += fmt::format("{},{:.6f},{:.6f},{}\n", to_string(b.source), b.intercept, b.slope,
                     to_string(b.direction));
  return s;
}

std::string region_csv(const std::vector<PenaltyBound>& bounds, const BoundsSettings& s) {
  std::string out = "c_out,c_in_lower,c_in_upper,empty\n";
  for (const auto& iv : penalty_region(bounds, linspace(s.c_out_min, s.c_out_max, s.c_out_points)))
    out += fmt::format("{:.6f},{:.6f},{:.6f},{}\n", iv.c_out, iv.lower, iv.upper, iv.empty() ? 1 : 0);
  return out;
}

struct Estimand {
  std::optional<ChoiceData> data;
  RevealedPosteriors posteriors;
};

Estimand read_estimand(const std::string& path, ChoiceRegime regime) {
  const auto t = io::Table::load(path);
  Estimand e;
  if (auto rp = io::parse_posteriors(t)) {
    e.posteriors = *rp;
  } else {
    e.data = io::parse_choice_data(t, regime);
    e.posteriors = revealed_posteriors(*e.data);
  }
  return e;
}

int cmd_simulate(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto sim = simulate(cfg.sim);
  OutputDir out("simulate", f.out, cfg, f.config ? std::vector{*f.config} : std::vector<std::string>{});
  out.write("bounces.csv", io::bounces_csv(sim.bounces));
  out.write("points.csv", io::points_csv(sim.points));
  out.write("challenges.csv", io::challenges_csv(sim.challenges));
  out.write("truth.csv", io::truth_csv(sim.truth));
  out.write("config.ini", config_to_ini(cfg, false));
  out.finish();
  fmt::print("{} bounces, {} points, {} challenges -> {}\n", sim.bounces.size(), sim.points.size(),
             sim.challenges.size(), f.out);
  return 0;
}

int cmd_solve(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto& s = cfg.solve;
  UtilityEnvironment env;
  AttentionCost cost = s.kappa;
  try {
    env = UtilityEnvironment::with_challenges(s.eta_in, s.eta_out, s.c_in, s.c_out);
    cost.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const Prior prior = Prior::from_in(s.prior_in);
  const auto sol = s.method == "exact" ? solve_exact_structure(env, cost, prior)
                                       : solve_optimal_structure(env, cost, prior);
  nlohmann::json j;
  j["method"] = s.method;
  j["regime"] = to_string(sol.regime);
  j["structure"] = to_json(sol.structure);
  j["posterior_call_in"] = detail::round_sig(sol.posterior_call_in.p_in(), 12);
  j["posterior_call_out"] = detail::round_sig(sol.posterior_call_out.p_in(), 12);
  j["weight_call_in"] = detail::round_sig(sol.weight_call_in, 12);
  j["net_utility"] = detail::round_sig(sol.net_utility, 12);
  nlohmann::json cp;
  for (Action a : kActions)
    for (State w : kStates)
      cp[fmt::format("{}_{}", to_string(a), to_string(w))] = detail::round_sig(sol.choice_probs(a, w), 12);
  j["choice_probabilities"] = cp;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!f.out.empty()) {
    OutputDir out("solve", f.out, cfg, f.config ? std::vector{*f.config} : std::vector<std::string>{});
    out.write("solution.json", text);
    out.write("choice_data.csv", io::choice_data_csv(sol.choice_probs));
    out.finish();
  }
  return 0;
}

int cmd_estimate(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto conv = cfg.estimate.convention;
  const auto pre = read_estimand(f.pre, ChoiceRegime::NoChallenges);
  TwoStageReport r;
  r.convention = conv;
  std::string text, csv;
  std::vector<std::string> inputs{f.pre};
  if (f.post.empty()) {
    r.pre = pre.posteriors;
    r.kappa = estimate_kappa(r.pre, conv);
    text = fmt::format(
        "Estimated optimal posteriors and costs of attention [{} convention]\n"
        "  {:<20}{:>16.3f}\n  {:<20}{:>16.3f}\n  {:<20}{:>16.3f}\n  {:<20}{:>16.3f}\n",
        to_string(conv), "gamma_in(In)", r.pre.in_given_call_in, "gamma_out(Out)",
        r.pre.out_given_call_out, "kappa_in", r.kappa.kappa_in, "kappa_out", r.kappa.kappa_out);
    csv = fmt::format(
        "table,parameter,value,std_error\nposteriors,gamma_in_in,{:.6f},\n"
        "posteriors,gamma_out_out,{:.6f},\nposteriors,kappa_in,{:.6f},\n"
        "posteriors,kappa_out,{:.6f},\n",
        r.pre.in_given_call_in, r.pre.out_given_call_out, r.kappa.kappa_in, r.kappa.kappa_out);
  } else {
    if (!cfg.estimate.eta_in || !cfg.estimate.eta_out)
      throw ConfigError("penalties need challenge rates: pass --eta-in and --eta-out");
    const double ei = *cfg.estimate.eta_in, eo = *cfg.estimate.eta_out;
    const auto post = read_estimand(f.post, ChoiceRegime::Challenges);
    inputs.push_back(f.post);
    if (pre.data && post.data) {
      r = two_stage_pipeline(*pre.data, *post.data, ei, eo, conv);
    } else {
      r.pre = pre.posteriors;
      r.post = post.posteriors;
      r.kappa = estimate_kappa(r.pre, conv);
      r.penalties = estimate_penalties(r.post, r.kappa, ei, eo, conv);
    }
    text = report_text(r);
    csv = report_csv(r);
  }
  std::cout << text;
  if (!f.out.empty()) {
    OutputDir out("estimate", f.out, cfg, inputs);
    out.write("estimate.txt", text);
    out.write("estimate.csv", csv);
    out.finish();
  }
  return 0;
}

int cmd_bounds(const Flags& f) {
  const auto cfg = effective_config(f);
  if (!cfg.estimate.eta_in || !cfg.estimate.eta_out)
    throw ConfigError("bounds need challenge rates: pass --eta-in and --eta-out");
  const auto pre = io::parse_choice_data(io::Table::load(f.pre), ChoiceRegime::NoChallenges);
  const auto post = io::parse_choice_data(io::Table::load(f.post), ChoiceRegime::Challenges);
  const double ei = *cfg.estimate.eta_in, eo = *cfg.estimate.eta_out;
  std::vector<PenaltyBound> bounds;
  try {
    bounds = nias_penalty_bounds(post, ei, eo);
    bounds.push_back(niac_bound(pre, post, ei, eo));
  } catch (const InvalidInput& e) {
    throw NumericalError(e.what());
  }
  const auto csv = bounds_csv(bounds);
  std::cout << csv;
  if (!f.out.empty()) {
    OutputDir out("bounds", f.out, cfg, {f.pre, f.post});
    out.write("bounds.csv", csv);
    out.write("region.csv", region_csv(bounds, cfg.bounds));
    out.finish();
  }
  return 0;
}

int cmd_link(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto logs = read_logs(f.in);
  const auto links = link_challenges(logs.bounces, logs.points, logs.challenges,
                                     logs.truth ? &*logs.truth : nullptr);
  const auto metrics = link_metrics_json(links.metrics).dump(2) + "\n";
  std::cout << metrics;
  OutputDir out("link", f.out, cfg, logs.paths);
  out.write("links.csv", links_csv(links));
  out.write("link_metrics.json", metrics);
  out.write("bounces_restored.csv",
            io::bounces_csv(restore_original_calls(logs.bounces, links, logs.challenges)));
  out.finish();
  return 0;
}

int cmd_audit(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto logs = read_logs(f.in);
  auto audit = identify_incorrect_calls(logs.points, logs.bounces);
  if (logs.truth) score_audit(audit, logs.bounces);
  const auto metrics = audit_metrics_json(audit).dump(2) + "\n";
  std::cout << metrics;
  OutputDir out("audit", f.out, cfg, logs.paths);
  out.write("audit.csv", audit_csv(audit));
  out.write("audit_metrics.json", metrics);
  out.finish();
  return 0;
}

void write_report(OutputDir& out, const LogAnalysis& a, const RunConfig& cfg) {
  for (const auto& [name, content] : report_files(a.rows, cfg.report, cfg.sim.bin_width_mm))
    out.write(name, content);
}

int cmd_report(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto logs = read_logs(f.in);
  const auto a = analyse(logs, cfg);
  OutputDir out("report", f.out, cfg, logs.paths);
  write_report(out, a, cfg);
  out.finish();
  fmt::print("{} consolidated bounces -> {}\n", a.rows.size(), f.out);
  return 0;
}

int cmd_roundtrip(const Flags& f) {
  const auto cfg = effective_config(f);
  const auto sim = simulate(cfg.sim);
  const auto a = analyse_logs(sim.bounces, sim.points, sim.challenges, &sim.truth,
                              std::max(cfg.sim.window_mm(), cfg.report.window_mm));
  std::vector<GroupEstimate> groups;
  for (const auto& g : group_bins(cfg.sim))
    groups.push_back(estimate_group(a.rows, g, cfg.estimate, cfg.roundtrip.max_se));

  OutputDir out("roundtrip", f.out, cfg, f.config ? std::vector{*f.config} : std::vector<std::string>{});
  out.write("config.ini", config_to_ini(cfg, false));
  out.write("bounces.csv", io::bounces_csv(sim.bounces));
  out.write("points.csv", io::points_csv(sim.points));
  out.write("challenges.csv", io::challenges_csv(sim.challenges));
  out.write("truth.csv", io::truth_csv(sim.truth));
  out.write("links.csv", links_csv(a.links));
  out.write("link_metrics.json", link_metrics_json(a.links.metrics).dump(2) + "\n");
  out.write("audit.csv", audit_csv(a.audit));
  out.write("audit_metrics.json", audit_metrics_json(a.audit).dump(2) + "\n");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    if (!g.report) continue;
    out.write(fmt::format("estimate_group{}.csv", i), report_csv(*g.report));
    if (!g.bounds.empty()) out.write(fmt::format("bounds_group{}.csv", i), bounds_csv(g.bounds));
  }
  write_report(out, a, cfg);
  const auto summary = roundtrip_summary_text(groups, cfg.roundtrip.max_se);
  out.write("roundtrip_summary.csv", roundtrip_summary_csv(groups));
  out.write("roundtrip_summary.txt", summary);
  out.finish();
  std::cout << summary;

  bool ok = true;
  for (const auto& g : groups) ok = ok && g.pass();
  if (!ok) {
    std::cerr << "error: recovered parameters differ from the configured truth\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Umpire attention under review: simulation, estimation and audit"};
  app.require_subcommand(0, 1);
  Flags f;
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the effective configuration with defaults");
  app.add_option("--config", f.config, "Key-value configuration file");
  app.set_version_flag("--version", kVersion);

  auto common = [&](CLI::App* sub, bool sim_flags) {
    sub->add_option("--config", f.config, "Key-value configuration file")->check(CLI::ExistingFile);
    if (sim_flags) {
      sub->add_option("--seed", f.seed, "Master seed");
      sub->add_option("--threads", f.threads, "Worker threads");
    }
  };
  auto eta = [&](CLI::App* sub) {
    sub->add_option("--eta-in", f.eta_in, "Challenge rate of Type II mistakes")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--eta-out", f.eta_out, "Challenge rate of Type I mistakes")->check(CLI::Range(0.0, 1.0));
  };

  auto* sim = app.add_subcommand("simulate", "Generate bounce, point and challenge logs");
  common(sim, true);
  sim->add_option("--out", f.out, "Output directory")->required();

  auto* solve = app.add_subcommand("solve", "Solve the umpire's attention problem");
  common(solve, false);
  solve->add_option("--out", f.out, "Output directory");

  auto* est = app.add_subcommand("estimate", "Estimate attention costs and penalties");
  common(est, false);
  est->add_option("--pre", f.pre, "Choice data or posteriors without challenges")->required()->check(CLI::ExistingFile);
  est->add_option("--post", f.post, "Choice data or posteriors with challenges")->check(CLI::ExistingFile);
  est->add_option("--convention", f.convention, "Log-term convention")
      ->check(CLI::IsMember({"printed", "table"}));
  eta(est);
  est->add_option("--out", f.out, "Output directory");

  auto* bnd = app.add_subcommand("bounds", "Revealed-preference bounds on penalties");
  common(bnd, false);
  bnd->add_option("--pre", f.pre, "Choice data without challenges")->required()->check(CLI::ExistingFile);
  bnd->add_option("--post", f.post, "Choice data with challenges")->required()->check(CLI::ExistingFile);
  eta(bnd);
  bnd->add_option("--out", f.out, "Output directory");

  std::vector<CLI::App*> log_cmds;
  for (auto [name, help] : {std::pair{"link", "Link challenges to bounces"},
                            std::pair{"audit", "Flag incorrect calls from point play"},
                            std::pair{"report", "Regression tables and plot-ready rates"}}) {
    auto* sub = app.add_subcommand(name, help);
    common(sub, false);
    sub->add_option("--in", f.in, "Directory with bounces.csv, points.csv, challenges.csv")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--out", f.out, "Output directory")->required();
    log_cmds.push_back(sub);
  }

  auto* rt = app.add_subcommand("roundtrip", "Simulate, analyse and compare with the truth");
  common(rt, true);
  rt->add_option("--convention", f.convention, "Log-term convention")
      ->check(CLI::IsMember({"printed", "table"}));
  rt->add_option("--out", f.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_name() != "RequiredError" && e.get_name() != "ValidationError") std::cerr << app.help();
    return 2;
  }

  try {
    if (print_config) {
      std::cout << config_to_ini(effective_config(f), true);
      return 0;
    }
    if (sim->parsed()) return cmd_simulate(f);
    if (solve->parsed()) return cmd_solve(f);
    if (est->parsed()) return cmd_estimate(f);
    if (bnd->parsed()) return cmd_bounds(f);
    if (log_cmds[0]->parsed()) return cmd_link(f);
    if (log_cmds[1]->parsed()) return cmd_audit(f);
    if (log_cmds[2]->parsed()) return cmd_report(f);
    if (rt->parsed()) return cmd_roundtrip(f);
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataFormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const InvalidInput& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}
