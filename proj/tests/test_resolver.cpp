#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "foldplan/resolver.hpp"

using namespace foldplan;

namespace {

SolveOutcome with_dead(std::vector<int> dead) {
  SolveOutcome o;
  o.deadlocked_robots = std::move(dead);
  o.converged = o.deadlocked_robots.empty();
  return o;
}

}  // namespace

TEST(Resolver, EfficiencyValues) {
  EXPECT_EQ(efficiency(0, 547), 1.0);
  EXPECT_NEAR(efficiency(1, 547), 0.99817, 5e-6);
  EXPECT_NEAR(efficiency(1, 19), 0.947, 5e-4);
  EXPECT_EQ(efficiency(600, 547), 0.0);
}

TEST(Resolver, DeadlockGroups) {
  const auto g = build_hex_grid(547, 22.4, {}, 2.5);
  EXPECT_TRUE(deadlock_groups(with_dead({}), g).empty());
  ASSERT_TRUE(std::binary_search(g.neighbors[3].begin(), g.neighbors[3].end(), 4));
  auto groups = deadlock_groups(with_dead({4, 3}), g);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0], (std::vector<int>{3, 4}));
  ASSERT_FALSE(std::binary_search(g.neighbors[3].begin(), g.neighbors[3].end(), 400));
  groups = deadlock_groups(with_dead({400, 3}), g);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0], (std::vector<int>{3}));
  EXPECT_EQ(groups[1], (std::vector<int>{400}));
  // A chain joined through neighbors forms one group of four.
  groups = deadlock_groups(with_dead({0, 1, 2, 3}), g);
  EXPECT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].size(), 4u);
}

TEST(Resolver, AlreadyConvergedNeedsOnePass) {
  auto c = make_configuration(build_hex_grid(19, 22.4, {}, 2.5), {10, 170});
  const auto rep = solve_with_replacement(c, greedy_config(0.5));
  EXPECT_TRUE(rep.converged());
  EXPECT_EQ(rep.generator_passes, 1);
  EXPECT_TRUE(rep.replaced_robot_indices.empty());
  EXPECT_EQ(efficiency(rep, c.size()), 1.0);
  EXPECT_GE(rep.total_wall_time, rep.final_outcome.wall_time);
}

TEST(Resolver, RejectsForward) {
  auto c = make_configuration(build_hex_grid(7, 22.4, {}, 2.5), {10, 170});
  SolveConfig sc = greedy_config(0.5);
  sc.direction = Direction::forward;
  EXPECT_THROW(solve_with_replacement(c, sc), ConfigError);
}

TEST(Resolver, ReplacementInvariants) {
  // Dense 19-robot trials with a short sweep cap so deadlocks happen.
  int with_replacement = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = build_hex_grid(19, 22.4, {}, 3.5);
    const double md = max_displacement(g.geom, 1.0);
    auto c = assign_random_targets(g, seed, md);
    set_folded_destination(c, {10, 170});
    SolveConfig sc = greedy_config(1.0, seed);
    sc.max_steps = 120;
    ReplacementOptions opts;
    opts.source_slack = md;
    opts.max_rounds = 30;
    const auto rep = solve_with_replacement(c, sc, opts);
    const std::set<int> ever(rep.ever_deadlocked.begin(), rep.ever_deadlocked.end());
    for (int k : rep.replaced_robot_indices) EXPECT_TRUE(ever.count(k)) << k;
    EXPECT_EQ(rep.replaced_robot_indices.size(), rep.replacement_draw_counts.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_EQ(rep.final_sources.states[i].destination, c.states[i].destination);
      EXPECT_FALSE(is_collided(rep.final_sources, i));
      const bool replaced = std::binary_search(rep.replaced_robot_indices.begin(),
                                               rep.replaced_robot_indices.end(), int(i));
      if (!replaced) EXPECT_EQ(rep.final_sources.states[i].initial, c.states[i].initial);
    }
    EXPECT_GE(rep.total_wall_time, rep.final_outcome.wall_time);
    EXPECT_EQ(rep.converged_first_pass, rep.generator_passes == 1 && rep.converged());
    if (!rep.replaced_robot_indices.empty()) ++with_replacement;
  }
  EXPECT_GT(with_replacement, 0);
}

TEST(Resolver, SingleModeReplacesOnePerPass) {
  const auto g = build_hex_grid(19, 22.4, {}, 3.5);
  const double md = max_displacement(g.geom, 1.0);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    auto c = assign_random_targets(g, seed, md);
    set_folded_destination(c, {10, 170});
    SolveConfig sc = greedy_config(1.0, seed);
    sc.max_steps = 120;
    ReplacementOptions opts;
    opts.mode = ReplacementMode::single;
    opts.source_slack = md;
    const auto rep = solve_with_replacement(c, sc, opts);
    int draws = 0;
    for (const auto& [k, n] : rep.replacement_draw_counts) draws += n;
    EXPECT_EQ(draws, rep.generator_passes - 1);
  }
}

TEST(Resolver, Deterministic) {
  const auto g = build_hex_grid(37, 22.4, {}, 3.5);
  auto c = assign_random_targets(g, 3, 0.1);
  set_folded_destination(c, {10, 170});
  SolveConfig sc = greedy_config(1.0, 3);
  sc.max_steps = 150;
  const auto a = solve_with_replacement(c, sc);
  const auto b = solve_with_replacement(c, sc);
  EXPECT_EQ(a.replaced_robot_indices, b.replaced_robot_indices);
  EXPECT_EQ(a.generator_passes, b.generator_passes);
  EXPECT_EQ(a.final_outcome.steps_used, b.final_outcome.steps_used);
}
