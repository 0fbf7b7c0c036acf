#pragma once

// Deadlock resolution by source replacement around a reverse solve.
//
// Replacement draws use their own generator seeded from the solve seed, so a
// configuration that converges first time draws nothing extra. Pass k > 0
// re-solves with derive_seed(rng_seed, k).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "foldplan/errors.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/pathgen.hpp"
#include "foldplan/random.hpp"

namespace foldplan {

// Connected components of the deadlocked set under the neighbor relation,
// each sorted, ordered by smallest member.
inline std::vector<std::vector<int>> deadlock_groups(const SolveOutcome& outcome,
                                                     const GridLayout& layout) {
  std::vector<std::vector<int>> groups;
  if (outcome.deadlocked_robots.empty()) return groups;
  std::vector<char> stuck(layout.size(), 0);
  for (int i : outcome.deadlocked_robots) stuck[static_cast<std::size_t>(i)] = 1;
  std::vector<char> seen(layout.size(), 0);
  std::vector<int> sorted = outcome.deadlocked_robots;
  std::sort(sorted.begin(), sorted.end());
  for (int start : sorted) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> group;
    std::vector<int> stack{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      group.push_back(k);
      for (int j : layout.neighbors[static_cast<std::size_t>(k)]) {
        const auto jj = static_cast<std::size_t>(j);
        if (stuck[jj] && !seen[jj]) {
          seen[jj] = 1;
          stack.push_back(j);
        }
      }
    }
    std::sort(group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

enum class ReplacementMode { per_group, single };

struct ReplacementOptions {
  int max_rounds = 100;
  ReplacementMode mode = ReplacementMode::per_group;
  // Clearance above 2*cbuff demanded of redrawn sources. Use the stepper's
  // max displacement so a fresh source is never frozen inside the approach
  // margin from the first sweep.
  double source_slack = 0.0;
};

struct ReplacementReport {
  std::vector<int> replaced_robot_indices;         // sorted, each once
  std::map<int, int> replacement_draw_counts;      // robot -> times replaced
  int generator_passes = 0;
  double total_wall_time = 0.0;                    // tau_sr, seconds
  SolveOutcome final_outcome;
  bool converged_first_pass = false;
  std::vector<int> first_pass_group_sizes;         // sorted descending
  std::vector<int> ever_deadlocked;                // sorted
  GridConfiguration final_sources;                 // sources the final pass solved

  bool converged() const { return final_outcome.converged; }
};

inline double efficiency(std::size_t n_replaced, std::size_t n_robots) {
  if (n_robots == 0) return 1.0;
  return static_cast<double>(n_robots - std::min(n_replaced, n_robots)) /
         static_cast<double>(n_robots);
}

inline double efficiency(const ReplacementReport& report, std::size_t n_robots) {
  return efficiency(report.replaced_robot_indices.size(), n_robots);
}

// Reverse-solves `config` (initial = sources, destination = fold); on
// deadlock redraws the source of one random robot per deadlock group (or a
// single robot overall) and re-solves, until convergence or max_rounds
// passes.
inline ReplacementReport solve_with_replacement(const GridConfiguration& config,
                                                const SolveConfig& sc,
                                                const ReplacementOptions& opts = {}) {
  if (sc.direction != Direction::reverse) {
    throw ConfigError("source replacement needs a reverse solve (sources are the initial poses)");
  }
  if (opts.max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  GridConfiguration work = config;
  for (auto& s : work.states) s.current = s.initial;
  Rng draw_rng(derive_seed(sc.rng_seed, 0x7265706c));  // "repl"
  ReplacementReport report;
  std::set<int> replaced;
  std::set<int> ever;

  for (int pass = 0; pass < opts.max_rounds; ++pass) {
    SolveConfig pass_sc = sc;
    if (pass > 0) pass_sc.rng_seed = derive_seed(sc.rng_seed, static_cast<std::uint64_t>(pass));
    report.final_outcome = solve(work, pass_sc);
    report.generator_passes = pass + 1;
    const auto groups = deadlock_groups(report.final_outcome, work.layout);
    if (pass == 0) {
      report.converged_first_pass = report.final_outcome.converged;
      for (const auto& g : groups) report.first_pass_group_sizes.push_back(static_cast<int>(g.size()));
      std::sort(report.first_pass_group_sizes.rbegin(), report.first_pass_group_sizes.rend());
    }
    if (report.final_outcome.converged) break;
    ever.insert(report.final_outcome.deadlocked_robots.begin(),
                report.final_outcome.deadlocked_robots.end());
    if (pass + 1 == opts.max_rounds) break;

    std::vector<int> picks;
    if (opts.mode == ReplacementMode::single) {
      const auto& d = report.final_outcome.deadlocked_robots;
      picks.push_back(d[uniform_index(draw_rng, d.size())]);
    } else {
      for (const auto& g : groups) picks.push_back(g[uniform_index(draw_rng, g.size())]);
    }
    for (int k : picks) {
      const auto kk = static_cast<std::size_t>(k);
      // Offline robots never deadlock, so every pick is online; check
      // against every other robot's current source.
      if (!redraw_clear(work, kk, draw_rng, [kk](std::size_t j) { return j != kk; },
                        opts.source_slack)) {
        std::ostringstream msg;
        msg << "robot " << k << ": no collision-free replacement source after " << kMaxRedraws
            << " draws";
        throw InfeasibleError(msg.str());
      }
      work.states[kk].initial = work.states[kk].current;
      replaced.insert(k);
      ++report.replacement_draw_counts[k];
    }
  }

  report.replaced_robot_indices.assign(replaced.begin(), replaced.end());
  report.ever_deadlocked.assign(ever.begin(), ever.end());
  for (auto& s : work.states) s.current = s.initial;
  report.final_sources = std::move(work);
  report.total_wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace foldplan
