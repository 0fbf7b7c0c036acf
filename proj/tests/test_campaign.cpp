#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "foldplan/campaign.hpp"

using namespace foldplan;

namespace {

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("foldplan_campaign_" + name)).string();
}

CampaignSpec tiny_spec(int trials = 3) {
  CampaignSpec s;
  s.name = "tiny";
  s.grid_sizes = {19};
  s.cbuffs = {2.5, 3.5};
  s.step_degs = {1.0};
  s.arms = {{"GC", 1.0, 0.0}, {"MC", 0.9, 0.3}};
  s.trials = trials;
  s.base_seed = 1234;
  return s;
}

TrialRecord rec_with(double eff) {
  TrialRecord r;
  r.cell = "c";
  r.efficiency = eff;
  r.fold_time_s = 10.0 * eff;
  return r;
}

}  // namespace

TEST(Campaign, CellsAndSeeds) {
  const auto s = tiny_spec();
  const auto cells = s.cells();
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].key(), "n19_cb2.5_s1_GC");
  EXPECT_EQ(cells[3].key(), "n19_cb3.5_s1_MC");
  std::set<std::uint64_t> seeds;
  for (const auto& c : cells) {
    for (int t = 0; t < 50; ++t) seeds.insert(trial_seed(s.base_seed, c, t));
  }
  EXPECT_EQ(seeds.size(), 200u);
  // A cell's seeds do not depend on its position in the spec.
  CampaignSpec other = s;
  other.cbuffs = {3.5};
  EXPECT_EQ(trial_seed(s.base_seed, cells[2], 7), trial_seed(s.base_seed, other.cells()[0], 7));
}

TEST(Campaign, SpecJson) {
  const auto s = tiny_spec();
  const auto back = campaign_spec_from_json(campaign_spec_to_json(s));
  EXPECT_EQ(back.cells().size(), 4u);
  EXPECT_EQ(back.arms[1].phobia, 0.3);
  EXPECT_EQ(back.base_seed, 1234u);
  json bad = campaign_spec_to_json(s);
  bad["colour"] = "red";
  EXPECT_THROW(campaign_spec_from_json(bad), ParseError);
  bad = campaign_spec_to_json(s);
  bad["grid_sizes"] = json::array({20});
  EXPECT_THROW(campaign_spec_from_json(bad), ParseError);
  bad = campaign_spec_to_json(s);
  bad["trials"] = "many";
  EXPECT_THROW(campaign_spec_from_json(bad), ParseError);
}

TEST(Campaign, CsvRowRoundTrip) {
  TrialRecord r;
  r.cell = "n19_cb2.5_s1_GC";
  r.n_robots = 19;
  r.cbuff = 2.5;
  r.step_deg = 1.0;
  r.arm = "GC";
  r.trial = 4;
  r.seed = 18446744073709551615ULL;
  r.efficiency = 0.947368421;
  r.n_replaced = 1;
  r.deadlock_group_sizes = {4, 1};
  r.tau_pg_s = 0.5;
  r.max_points = 77;
  const auto back = trial_from_csv_row(to_csv_row(r), "row");
  EXPECT_EQ(to_csv_row(back), to_csv_row(r));
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.deadlock_group_sizes, r.deadlock_group_sizes);
  EXPECT_FALSE(back.tau_sr_s.has_value());
  EXPECT_THROW(trial_from_csv_row("a,b,c", "row"), ParseError);
}

TEST(Campaign, DeterministicAcrossRunsAndWorkers) {
  const auto s = tiny_spec();
  CampaignOptions o;
  o.with_timing = false;
  o.csv_path = tmp("a.csv");
  o.workers = 1;
  const auto ra = run_campaign(s, o);
  const std::string a = read_text_file(o.csv_path);
  o.csv_path = tmp("b.csv");
  o.workers = 3;
  run_campaign(s, o);
  const std::string b = read_text_file(o.csv_path);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ra.size(), 12u);
  // The CSV rounds to 10 significant digits, so compare against records
  // passed through the same text form.
  std::vector<TrialRecord> rt;
  for (const auto& r : ra) rt.push_back(trial_from_csv_row(to_csv_row(r), "row"));
  EXPECT_EQ(summary_csv(aggregate(rt)), summary_csv(aggregate(read_trials_csv(tmp("a.csv")))));
  EXPECT_EQ(summary_csv(aggregate(rt)), summary_csv(aggregate(read_trials_csv(o.csv_path))));
  std::filesystem::remove(tmp("a.csv"));
  std::filesystem::remove(tmp("b.csv"));
}

TEST(Campaign, ResumeCompletesToSameBytes) {
  const auto full = tiny_spec(4);
  CampaignOptions o;
  o.with_timing = false;
  o.csv_path = tmp("full.csv");
  run_campaign(full, o);
  const std::string want = read_text_file(o.csv_path);

  o.csv_path = tmp("part.csv");
  run_campaign(tiny_spec(2), o);
  o.resume = true;
  int fresh = 0;
  o.on_record = [&](const TrialRecord&, std::size_t, std::size_t) { ++fresh; };
  run_campaign(full, o);
  EXPECT_EQ(fresh, 8);
  EXPECT_EQ(read_text_file(o.csv_path), want);
  std::filesystem::remove(tmp("full.csv"));
  std::filesystem::remove(tmp("part.csv"));
}

TEST(Campaign, RecordInvariants) {
  const auto s = tiny_spec();
  for (const auto& r : run_campaign(s)) {
    ASSERT_TRUE(r.ok) << r.error;
    EXPECT_NEAR(r.fold_time_s, r.steps_used * r.step_deg / 30.0, 1e-12);
    ASSERT_TRUE(r.tau_pg_s && r.tau_sr_s);
    EXPECT_GE(*r.tau_sr_s, *r.tau_pg_s);
    EXPECT_NEAR(r.efficiency, (19.0 - r.n_replaced) / 19.0, 1e-12);
    EXPECT_EQ(r.converged_first_pass, r.deadlock_group_sizes.empty());
  }
}

TEST(Campaign, ForwardDirectionReportsArrivals) {
  auto s = tiny_spec(2);
  s.direction = Direction::forward;
  s.cbuffs = {3.5};
  s.step_degs = {0.5};
  s.arms = {{"GC", 1.0, 0.0}};
  for (const auto& r : run_campaign(s)) {
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(r.n_replaced, 0);
    EXPECT_NEAR(r.efficiency, (19.0 - r.first_pass_deadlocked) / 19.0, 1e-12);
  }
}

TEST(Campaign, FailedTrialsAreRecordedNotFatal) {
  auto s = tiny_spec(1);
  s.cbuffs = {40.0};
  s.arms = {{"GC", 1.0, 0.0}};
  const auto rs = run_campaign(s);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_FALSE(rs[0].ok);
  EXPECT_FALSE(rs[0].error.empty());
  const auto sum = aggregate(rs);
  EXPECT_EQ(sum[0].n_errors, 1u);
}

TEST(Campaign, PostprocessColumns) {
  auto s = tiny_spec(1);
  s.cbuffs = {2.5};
  s.step_degs = {0.5};
  s.arms = {{"GC", 1.0, 0.0}};
  s.post.enabled = true;
  const auto rs = run_campaign(s);
  ASSERT_TRUE(rs[0].converged);
  ASSERT_TRUE(rs[0].max_points.has_value());
  EXPECT_LE(*rs[0].max_points, 1024);
  EXPECT_EQ(rs[0].verify_collisions.value_or(99), 0u);
}

TEST(Aggregate, SingleRecord) {
  const auto s = aggregate({rec_with(0.99)});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].efficiency.mean, 0.99);
  EXPECT_EQ(s[0].efficiency.min, 0.99);
  EXPECT_EQ(s[0].efficiency.ci95, 0.0);
  EXPECT_THROW(aggregate({}), PreconditionError);
}

TEST(Aggregate, MeanMinAndCi) {
  const auto s = aggregate({rec_with(1.0), rec_with(0.998), rec_with(0.996)});
  EXPECT_NEAR(s[0].efficiency.mean, 0.998, 1e-12);
  EXPECT_EQ(s[0].efficiency.min, 0.996);
  // sd = 0.002, t(0.975, 2) = 4.302653
  EXPECT_NEAR(s[0].efficiency.ci95, 4.302653 * 0.002 / std::sqrt(3.0), 1e-6);
}

TEST(Aggregate, BoxStatistics) {
  // 1..9 plus an outlier at 40.
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 40};
  const auto st = describe(v);
  EXPECT_NEAR(st.q1, 3.25, 1e-12);
  EXPECT_NEAR(st.median, 5.5, 1e-12);
  EXPECT_NEAR(st.q3, 7.75, 1e-12);
  EXPECT_EQ(st.whisker_lo, 1.0);
  EXPECT_EQ(st.whisker_hi, 9.0);  // 40 > 7.75 + 1.5 * 4.5
  EXPECT_EQ(st.max, 40.0);
}

TEST(Aggregate, SummaryShapes) {
  const auto rows = aggregate({rec_with(1.0), rec_with(0.9)});
  const auto csv = summary_csv(rows);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), long(summary_columns().size() - 1));
  const auto j = summary_json(rows);
  EXPECT_EQ(j["cells"][0]["efficiency"]["n"], 2);
  EXPECT_TRUE(j["cells"][0]["mean_tau_pg_s"].is_null());
}

TEST(Campaign, BundledSpecsParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::string(FOLDPLAN_SOURCE_DIR) + "/configs")) {
    if (e.path().extension() != ".json") continue;
    const auto s = campaign_spec_from_json(load_json_file(e.path().string()), e.path().string());
    EXPECT_FALSE(s.cells().empty()) << e.path();
    // Round trip through the writer.
    EXPECT_EQ(campaign_spec_to_json(campaign_spec_from_json(campaign_spec_to_json(s))),
              campaign_spec_to_json(s));
    ++n;
  }
  EXPECT_GE(n, 5);
}
