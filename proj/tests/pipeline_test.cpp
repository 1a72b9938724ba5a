#include "gtest/gtest.h"
#include "oversight/pipeline.hpp"

namespace oversight {
namespace {

TEST(Grouping, AdjacentIdenticalBinsPool) {
  SimConfig c = SimConfig::reference_calibrated();
  const auto g = group_bins(c);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].bins, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(g[1].lo_mm, 20.0);
  EXPECT_DOUBLE_EQ(g[1].hi_mm, 100.0);
  EXPECT_EQ(g[1].bins.size(), 4u);
}

TEST(ChoiceRows, CountsByPeriodAndBand) {
  std::vector<ConsolidatedRow> rows(4);
  rows[0].distance_mm = 5.0, rows[0].call_in = true;
  rows[1].distance_mm = -5.0, rows[1].call_in = true;
  rows[2].distance_mm = -30.0, rows[2].call_in = false;
  rows[3].distance_mm = 8.0, rows[3].call_in = false, rows[3].post_hk = true;
  const auto d = choice_data_from_rows(rows, false, 0.0, 20.0);
  EXPECT_EQ(d.total_count(), 2);
  EXPECT_DOUBLE_EQ(d(Action::CallIn, State::Out), 0.5);
  EXPECT_THROW(choice_data_from_rows(rows, true, 20.0, 40.0), NumericalError);
}

TEST(ChallengeRates, OverturnedShareOfMistakes) {
  std::vector<ConsolidatedRow> rows;
  for (int i = 0; i < 10; ++i) {
    ConsolidatedRow r;
    r.post_hk = true;
    r.incorrect = true;
    r.distance_mm = i < 4 ? 10.0 : -10.0;
    r.overturned = i == 0 || i >= 7;
    rows.push_back(r);
  }
  const auto c = measure_challenge_rates(rows, 0.0, 20.0);
  EXPECT_DOUBLE_EQ(c.eta_in, 0.25);
  EXPECT_DOUBLE_EQ(c.eta_out, 0.5);
  EXPECT_EQ(c.mistakes_out, 6);
}

TEST(Roundtrip, DefaultConfigRecoversTruth) {
  RunConfig cfg = RunConfig::defaults();
  cfg.sim.threads = 4;
  const auto sim = simulate(cfg.sim);
  const auto a = analyse_logs(sim.bounces, sim.points, sim.challenges, &sim.truth,
                              cfg.sim.window_mm());
  for (const auto& g : group_bins(cfg.sim)) {
    const auto e = estimate_group(a.rows, g, cfg.estimate, cfg.roundtrip.max_se);
    ASSERT_TRUE(e.report.has_value()) << e.error;
    EXPECT_TRUE(e.pass()) << roundtrip_summary_text({e}, cfg.roundtrip.max_se);
    EXPECT_NEAR(e.rates->eta_in, 0.4, 0.06);
    EXPECT_EQ(e.bounds.size(), 3u);
  }
}

TEST(Roundtrip, WrongTruthIsCaught) {
  RunConfig cfg = RunConfig::defaults();
  cfg.sim.threads = 4;
  const auto sim = simulate(cfg.sim);
  const auto a = analyse_logs(sim.bounces, sim.points, sim.challenges, &sim.truth,
                              cfg.sim.window_mm());
  auto g = group_bins(cfg.sim).front();
  g.truth.c_in = -3.0;
  EXPECT_FALSE(estimate_group(a.rows, g, cfg.estimate, cfg.roundtrip.max_se).pass());
}

TEST(Report, ProducesEveryArtifact) {
  RunConfig cfg = RunConfig::defaults();
  cfg.sim.n_tournaments_pre = 3;
  cfg.sim.n_tournaments_post = 3;
  const auto sim = simulate(cfg.sim);
  const auto a = analyse_logs(sim.bounces, sim.points, sim.challenges, nullptr, 100.0);
  EXPECT_FALSE(a.audit.metrics.has_value());
  const auto files = report_files(a.rows, cfg.report, cfg.sim.bin_width_mm);
  for (const char* name : {"regressions.txt", "regression_all.csv", "bin_rates.csv",
                           "bin_rates_serve.csv", "bin_rates_rally.csv", "interaction_by_bin.csv",
                           "callin_trend.csv", "callin_trend.json"})
    EXPECT_TRUE(files.count(name)) << name;
}

}  // namespace
}  // namespace oversight
