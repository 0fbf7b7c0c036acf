#pragma once

// Monte Carlo campaigns: a grid of (robots, cbuff, step, algorithm) cells,
// each run for a number of seeded trials, streamed to CSV and folded into
// per-cell summary statistics.
//
// Trial seed = derive_seed(base_seed, fnv1a(cell key), trial). Targets use
// derive_seed(trial seed, 1), the stepper derive_seed(trial seed, 2), so a
// cell's records do not depend on which other cells the spec lists.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "foldplan/errors.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/io.hpp"
#include "foldplan/pathgen.hpp"
#include "foldplan/postprocess.hpp"
#include "foldplan/resolver.hpp"

namespace foldplan {

struct ArmSpec {
  std::string name = "GC";
  double greed = 1.0;
  double phobia = 0.0;
};

struct PostSpec {
  bool enabled = false;
  PostprocessConfig config;
};

struct Cell {
  int index = 0;
  int n_robots = 0;
  double cbuff = 0.0;
  double step_deg = 0.0;
  ArmSpec arm;

  std::string key() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "n%d_cb%g_s%g_%s", n_robots, cbuff, step_deg, arm.name.c_str());
    return buf;
  }
};

struct CampaignSpec {
  std::string name = "campaign";
  std::vector<int> grid_sizes{547};
  std::vector<double> cbuffs{2.5};
  std::vector<double> step_degs{0.1};
  std::vector<ArmSpec> arms{ArmSpec{}};
  int trials = 50;
  std::uint64_t base_seed = 0;
  AngularPose destination{10.0, 170.0};
  Direction direction = Direction::reverse;
  double pitch = 22.4;
  ArmGeometry geom;
  double axis_speed = 30.0;
  std::optional<int> max_steps;
  int max_rounds = 100;
  ReplacementMode mode = ReplacementMode::per_group;
  PostSpec post;

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (grid_sizes.empty() || cbuffs.empty() || step_degs.empty() || arms.empty()) {
      throw ConfigError("every campaign axis (grid_sizes, cbuffs, step_degs, arms) needs a value");
    }
    for (int n : grid_sizes) {
      if (!is_centered_hexagonal(n)) {
        throw ConfigError("grid size " + std::to_string(n) + " is not a centered hexagonal number");
      }
    }
    for (double c : cbuffs) {
      if (!(c >= 0.0)) throw ConfigError("cbuff values must be non-negative");
    }
    std::set<std::string> names;
    for (const auto& a : arms) {
      if (a.name.empty() || a.name.find_first_of(",\n\"") != std::string::npos) {
        throw ConfigError("arm names must be non-empty and free of commas and quotes");
      }
      if (!names.insert(a.name).second) throw ConfigError("duplicate arm name '" + a.name + "'");
      SolveConfig sc;
      sc.greed = a.greed;
      sc.phobia = a.phobia;
      sc.validate();
    }
    for (double s : step_degs) {
      SolveConfig sc;
      sc.step_deg = s;
      sc.max_steps = max_steps;
      sc.validate();
    }
    geom.validate();
    if (!within_travel_limits(destination)) throw ConfigError("destination outside travel limits");
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  }

  // Cartesian product, grid size outermost, arm innermost.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (int n : grid_sizes) {
      for (double c : cbuffs) {
        for (double s : step_degs) {
          for (const auto& a : arms) out.push_back({static_cast<int>(out.size()), n, c, s, a});
        }
      }
    }
    return out;
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t trial_seed(std::uint64_t base_seed, const Cell& cell, int trial) {
  return derive_seed(base_seed, fnv1a(cell.key()), static_cast<std::uint64_t>(trial));
}

struct TrialRecord {
  int cell_index = 0;
  std::string cell;
  int n_robots = 0;
  double cbuff = 0.0;
  double step_deg = 0.0;
  std::string arm;
  double greed = 1.0;
  double phobia = 0.0;
  Direction direction = Direction::reverse;
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  double efficiency = 0.0;
  bool converged_first_pass = false;
  bool converged = false;
  int n_replaced = 0;
  int generator_passes = 0;
  int first_pass_deadlocked = 0;
  std::vector<int> deadlock_group_sizes;  // first pass, descending
  int steps_used = 0;
  double fold_time_s = 0.0;
  std::optional<double> tau_pg_s;
  std::optional<double> tau_sr_s;
  std::optional<int> max_points;
  std::optional<std::size_t> verify_collisions;
  std::optional<double> min_distance_mm;
  std::string error;
};

// ---------------------------------------------------------------- CSV

inline const std::vector<std::string>& trial_columns() {
  static const std::vector<std::string> cols{
      "cell", "n_robots", "cbuff_mm", "step_deg", "arm", "greed", "phobia", "direction",
      "trial", "seed", "status", "efficiency", "converged_first_pass", "converged",
      "n_replaced", "generator_passes", "first_pass_deadlocked", "deadlock_group_sizes",
      "steps_used", "fold_time_s", "tau_pg_s", "tau_sr_s", "max_points", "verify_collisions",
      "min_distance_mm", "error"};
  return cols;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
std::string fmt_opt(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) return fmt_num(*v);
  else return std::to_string(*v);
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ';';
    s += std::to_string(v[k]);
  }
  return s;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

inline std::string direction_name(Direction d) { return d == Direction::forward ? "forward" : "reverse"; }

inline Direction direction_from_string(const std::string& s) {
  if (s == "forward" || s == "fwd") return Direction::forward;
  if (s == "reverse" || s == "rev") return Direction::reverse;
  throw ParseError("unknown direction '" + s + "' (forward|reverse)");
}

}  // namespace detail

inline std::string trial_csv_header() {
  std::string s;
  for (const auto& c : trial_columns()) s += (s.empty() ? "" : ",") + c;
  return s;
}

inline std::string to_csv_row(const TrialRecord& r) {
  using namespace detail;
  std::vector<std::string> f{r.cell,
                             std::to_string(r.n_robots),
                             fmt_num(r.cbuff),
                             fmt_num(r.step_deg),
                             r.arm,
                             fmt_num(r.greed),
                             fmt_num(r.phobia),
                             direction_name(r.direction),
                             std::to_string(r.trial),
                             std::to_string(r.seed),
                             r.ok ? "ok" : "error",
                             r.ok ? fmt_num(r.efficiency) : "",
                             r.ok ? std::to_string(int(r.converged_first_pass)) : "",
                             r.ok ? std::to_string(int(r.converged)) : "",
                             r.ok ? std::to_string(r.n_replaced) : "",
                             r.ok ? std::to_string(r.generator_passes) : "",
                             r.ok ? std::to_string(r.first_pass_deadlocked) : "",
                             join_ints(r.deadlock_group_sizes),
                             r.ok ? std::to_string(r.steps_used) : "",
                             r.ok ? fmt_num(r.fold_time_s) : "",
                             fmt_opt(r.tau_pg_s),
                             fmt_opt(r.tau_sr_s),
                             fmt_opt(r.max_points),
                             fmt_opt(r.verify_collisions),
                             fmt_opt(r.min_distance_mm),
                             csv_safe(r.error)};
  std::string s;
  for (std::size_t k = 0; k < f.size(); ++k) s += (k ? "," : "") + f[k];
  return s;
}

// Parses one data row. `cell_index` is not stored in the CSV; callers map
// the cell key back to the spec.
inline TrialRecord trial_from_csv_row(const std::string& line, const std::string& where) {
  const auto f = detail::split(line, ',');
  if (f.size() != trial_columns().size()) {
    throw ParseError(where + ": expected " + std::to_string(trial_columns().size()) +
                     " fields, found " + std::to_string(f.size()));
  }
  TrialRecord r;
  try {
    auto opt_d = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.cell = f[0];
    r.n_robots = std::stoi(f[1]);
    r.cbuff = std::stod(f[2]);
    r.step_deg = std::stod(f[3]);
    r.arm = f[4];
    r.greed = std::stod(f[5]);
    r.phobia = std::stod(f[6]);
    r.direction = detail::direction_from_string(f[7]);
    r.trial = std::stoi(f[8]);
    r.seed = std::stoull(f[9]);
    if (f[10] != "ok" && f[10] != "error") throw ParseError(where + ": bad status '" + f[10] + "'");
    r.ok = f[10] == "ok";
    if (r.ok) {
      r.efficiency = std::stod(f[11]);
      r.converged_first_pass = std::stoi(f[12]) != 0;
      r.converged = std::stoi(f[13]) != 0;
      r.n_replaced = std::stoi(f[14]);
      r.generator_passes = std::stoi(f[15]);
      r.first_pass_deadlocked = std::stoi(f[16]);
      r.steps_used = std::stoi(f[18]);
      r.fold_time_s = std::stod(f[19]);
    }
    if (!f[17].empty()) {
      for (const auto& g : detail::split(f[17], ';')) r.deadlock_group_sizes.push_back(std::stoi(g));
    }
    r.tau_pg_s = opt_d(f[20]);
    r.tau_sr_s = opt_d(f[21]);
    if (!f[22].empty()) r.max_points = std::stoi(f[22]);
    if (!f[23].empty()) r.verify_collisions = static_cast<std::size_t>(std::stoull(f[23]));
    r.min_distance_mm = opt_d(f[24]);
    r.error = f[25];
  } catch (const std::logic_error&) {
    throw ParseError(where + ": malformed number");
  }
  return r;
}

// Reads a trial CSV written by write_trials_csv / run_campaign.
inline std::vector<TrialRecord> read_trials_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (line != trial_csv_header()) throw ParseError(path + ":1: header does not match the trial schema");
  std::vector<TrialRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(trial_from_csv_row(line, path + ":" + std::to_string(lineno)));
  }
  return out;
}

inline void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& records) {
  std::string text = trial_csv_header() + "\n";
  for (const auto& r : records) text += to_csv_row(r) + "\n";
  write_text_file(path, text);
}

// ---------------------------------------------------------------- spec JSON

inline CampaignSpec campaign_spec_from_json(const json& j, const std::string& where = "spec") {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  CampaignSpec s;
  auto num_list = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw ParseError(where + "/" + key + ": expected an array of numbers");
    }
  };
  static const std::set<std::string> known{
      "name", "grid_sizes", "cbuffs", "step_degs", "arms", "trials", "base_seed", "destination",
      "direction", "pitch", "alpha_len", "beta_len", "axis_speed", "max_steps", "max_rounds",
      "replacement", "postprocess"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ParseError(where + ": unknown key '" + it.key() + "'");
  }
  try {
    s.name = j.value("name", s.name);
    num_list("grid_sizes", s.grid_sizes);
    num_list("cbuffs", s.cbuffs);
    num_list("step_degs", s.step_degs);
    s.trials = j.value("trials", s.trials);
    s.base_seed = j.value("base_seed", s.base_seed);
    s.pitch = j.value("pitch", s.pitch);
    s.geom.alpha_len = j.value("alpha_len", s.geom.alpha_len);
    s.geom.beta_len = j.value("beta_len", s.geom.beta_len);
    s.axis_speed = j.value("axis_speed", s.axis_speed);
    s.max_rounds = j.value("max_rounds", s.max_rounds);
    if (j.contains("max_steps") && !j.at("max_steps").is_null()) s.max_steps = j.at("max_steps").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": wrong value type (" + std::string(e.what()) + ")");
  }
  if (j.contains("destination")) s.destination = detail::pose_from_json(j.at("destination"), where + "/destination");
  if (j.contains("direction")) {
    if (!j.at("direction").is_string()) throw ParseError(where + "/direction: expected a string");
    s.direction = detail::direction_from_string(j.at("direction").get<std::string>());
  }
  if (j.contains("replacement")) {
    const auto m = j.at("replacement").is_string() ? j.at("replacement").get<std::string>() : "";
    if (m == "group") s.mode = ReplacementMode::per_group;
    else if (m == "single") s.mode = ReplacementMode::single;
    else throw ParseError(where + "/replacement: expected \"group\" or \"single\"");
  }
  if (j.contains("arms")) {
    const json& arms = detail::get_array(j, "arms", where);
    s.arms.clear();
    for (std::size_t k = 0; k < arms.size(); ++k) {
      const std::string w = where + "/arms/" + std::to_string(k);
      ArmSpec a;
      a.name = detail::get_field<std::string>(arms[k], "name", w);
      a.greed = detail::get_field<double>(arms[k], "greed", w);
      a.phobia = detail::get_field<double>(arms[k], "phobia", w);
      s.arms.push_back(a);
    }
  }
  if (j.contains("postprocess")) {
    const json& p = j.at("postprocess");
    const std::string w = where + "/postprocess";
    if (!p.is_object()) throw ParseError(w + ": expected an object");
    try {
      s.post.enabled = p.value("enabled", true);
      s.post.config.accel_limit = p.value("accel_limit", s.post.config.accel_limit);
      s.post.config.epsilon = p.value("epsilon", s.post.config.epsilon);
      s.post.config.sigma_smooth = p.value("sigma_smooth", s.post.config.sigma_smooth);
      s.post.config.max_points = p.value("max_points", s.post.config.max_points);
      if (p.contains("window") && !p.at("window").is_null()) s.post.config.window = p.at("window").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(w + ": wrong value type (" + std::string(e.what()) + ")");
    }
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
  return s;
}

inline json campaign_spec_to_json(const CampaignSpec& s) {
  json arms = json::array();
  for (const auto& a : s.arms) arms.push_back({{"name", a.name}, {"greed", a.greed}, {"phobia", a.phobia}});
  json j = {{"name", s.name},
            {"grid_sizes", s.grid_sizes},
            {"cbuffs", s.cbuffs},
            {"step_degs", s.step_degs},
            {"arms", arms},
            {"trials", s.trials},
            {"base_seed", s.base_seed},
            {"destination", {s.destination.alpha, s.destination.beta}},
            {"direction", detail::direction_name(s.direction)},
            {"pitch", s.pitch},
            {"alpha_len", s.geom.alpha_len},
            {"beta_len", s.geom.beta_len},
            {"axis_speed", s.axis_speed},
            {"max_steps", s.max_steps ? json(*s.max_steps) : json(nullptr)},
            {"max_rounds", s.max_rounds},
            {"replacement", s.mode == ReplacementMode::single ? "single" : "group"}};
  if (s.post.enabled) {
    j["postprocess"] = {{"enabled", true},
                        {"accel_limit", s.post.config.accel_limit},
                        {"epsilon", s.post.config.epsilon},
                        {"sigma_smooth", s.post.config.sigma_smooth},
                        {"max_points", s.post.config.max_points},
                        {"window", s.post.config.window ? json(*s.post.config.window) : json(nullptr)}};
  }
  return j;
}

// ---------------------------------------------------------------- trials

// Smooths, simplifies and verifies a converged trajectory; fills the
// post-processing columns of `rec`.
inline void postprocess_into(TrialRecord& rec, const Trajectory& raw, const GridLayout& layout,
                             const PostprocessConfig& pc) {
  const int w = pc.window ? *pc.window
                          : default_smoothing_window(raw.step_deg, raw.axis_speed, pc.accel_limit);
  Trajectory t = raw;
  if (w <= raw.last_step() + 1) t = smooth_velocity(raw, w);
  t = simplify_rdp(t, pc.epsilon, pc.max_points);
  const auto rep = verify_trajectory(t, layout, layout.cbuff - pc.sigma_smooth, 0.5 * raw.dt());
  rec.max_points = static_cast<int>(std::max(rep.max_points_alpha, rep.max_points_beta));
  rec.verify_collisions = rep.collision_count;
  if (std::isfinite(rep.min_distance_mm)) rec.min_distance_mm = rep.min_distance_mm;
}

// Sees the final solve of each trial (the raw trajectory, before any
// post-processing). Called from worker threads.
using TrialObserver =
    std::function<void(const TrialRecord&, const GridLayout&, const SolveOutcome&)>;

// One (cell, trial). Library errors are captured in the record.
inline TrialRecord run_trial(const CampaignSpec& spec, const Cell& cell, int trial,
                             bool with_timing = true, const TrialObserver& observe = {}) {
  TrialRecord rec;
  rec.cell_index = cell.index;
  rec.cell = cell.key();
  rec.n_robots = cell.n_robots;
  rec.cbuff = cell.cbuff;
  rec.step_deg = cell.step_deg;
  rec.arm = cell.arm.name;
  rec.greed = cell.arm.greed;
  rec.phobia = cell.arm.phobia;
  rec.direction = spec.direction;
  rec.trial = trial;
  rec.seed = trial_seed(spec.base_seed, cell, trial);
  try {
    const GridLayout layout = build_hex_grid(cell.n_robots, spec.pitch, spec.geom, cell.cbuff);
    const double md = max_displacement(spec.geom, cell.step_deg);
    GridConfiguration config = assign_random_targets(layout, derive_seed(rec.seed, 1), md);
    set_folded_destination(config, spec.destination);

    SolveConfig sc;
    sc.step_deg = cell.step_deg;
    sc.max_steps = spec.max_steps;
    sc.greed = cell.arm.greed;
    sc.phobia = cell.arm.phobia;
    sc.direction = spec.direction;
    sc.rng_seed = derive_seed(rec.seed, 2);
    sc.axis_speed = spec.axis_speed;

    const SolveOutcome* final_outcome = nullptr;
    ReplacementReport report;
    SolveOutcome fwd;
    if (spec.direction == Direction::reverse) {
      ReplacementOptions opts;
      opts.max_rounds = spec.max_rounds;
      opts.mode = spec.mode;
      opts.source_slack = md;
      report = solve_with_replacement(config, sc, opts);
      final_outcome = &report.final_outcome;
      rec.efficiency = efficiency(report, layout.size());
      rec.converged_first_pass = report.converged_first_pass;
      rec.n_replaced = static_cast<int>(report.replaced_robot_indices.size());
      rec.generator_passes = report.generator_passes;
      rec.deadlock_group_sizes = report.first_pass_group_sizes;
      int dead = 0;
      for (int g : report.first_pass_group_sizes) dead += g;
      rec.first_pass_deadlocked = dead;
      if (with_timing) rec.tau_sr_s = report.total_wall_time;
    } else {
      // Folded start, random targets as destinations; no replacement.
      for (auto& s : config.states) {
        s.destination = s.initial;
        s.initial = spec.destination;
        s.current = s.initial;
      }
      fwd = solve(config, sc);
      final_outcome = &fwd;
      const auto groups = deadlock_groups(fwd, layout);
      for (const auto& g : groups) rec.deadlock_group_sizes.push_back(static_cast<int>(g.size()));
      std::sort(rec.deadlock_group_sizes.rbegin(), rec.deadlock_group_sizes.rend());
      rec.first_pass_deadlocked = static_cast<int>(fwd.deadlocked_robots.size());
      rec.efficiency = efficiency(fwd.deadlocked_robots.size(), layout.size());
      rec.converged_first_pass = fwd.converged;
      rec.generator_passes = 1;
      if (with_timing) rec.tau_sr_s = fwd.wall_time;
    }
    rec.converged = final_outcome->converged;
    rec.steps_used = final_outcome->steps_used;
    rec.fold_time_s = final_outcome->fold_time(cell.step_deg, spec.axis_speed);
    if (with_timing) rec.tau_pg_s = final_outcome->wall_time;
    if (spec.post.enabled && final_outcome->converged) {
      postprocess_into(rec, final_outcome->trajectories, layout, spec.post.config);
    }
    if (observe) observe(rec, layout, *final_outcome);
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

struct CampaignOptions {
  int workers = 1;
  std::string csv_path;   // empty: no file output
  bool resume = false;
  bool with_timing = true;
  std::function<void(const TrialRecord&, std::size_t done, std::size_t total)> on_record;
  TrialObserver observe;
};

// Runs every missing (cell, trial) on a worker pool. Rows are appended to
// the CSV as they finish; the file is rewritten in (cell, trial) order at
// the end so its bytes do not depend on scheduling. Returns all records of
// the spec, resumed ones included, in that order.
inline std::vector<TrialRecord> run_campaign(const CampaignSpec& spec, const CampaignOptions& opts = {}) {
  spec.validate();
  const auto cells = spec.cells();
  std::map<std::string, int> cell_index;
  for (const auto& c : cells) cell_index[c.key()] = c.index;

  std::map<std::pair<int, int>, TrialRecord> done;
  if (opts.resume && !opts.csv_path.empty() && std::filesystem::exists(opts.csv_path)) {
    for (auto& r : read_trials_csv(opts.csv_path)) {
      auto it = cell_index.find(r.cell);
      if (it == cell_index.end() || r.trial < 0 || r.trial >= spec.trials) continue;
      r.cell_index = it->second;
      done[{r.cell_index, r.trial}] = std::move(r);
    }
  }

  std::vector<std::pair<int, int>> todo;
  for (const auto& c : cells) {
    for (int t = 0; t < spec.trials; ++t) {
      if (!done.count({c.index, t})) todo.push_back({c.index, t});
    }
  }

  std::ofstream csv;
  if (!opts.csv_path.empty()) {
    // Rewrite what is kept, then append as trials finish.
    std::vector<TrialRecord> kept;
    for (const auto& [k, r] : done) kept.push_back(r);
    write_trials_csv(opts.csv_path, kept);
    csv.open(opts.csv_path, std::ios::app);
    if (!csv) throw IoError("cannot open '" + opts.csv_path + "' for appending");
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const std::size_t total = cells.size() * static_cast<std::size_t>(spec.trials);
  std::size_t finished = done.size();
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const auto [ci, t] = todo[k];
      TrialRecord rec =
          run_trial(spec, cells[static_cast<std::size_t>(ci)], t, opts.with_timing, opts.observe);
      std::lock_guard<std::mutex> lock(mu);
      if (csv.is_open()) {
        csv << to_csv_row(rec) << '\n';
        csv.flush();
      }
      ++finished;
      if (opts.on_record) opts.on_record(rec, finished, total);
      done[{ci, t}] = std::move(rec);
    }
  };
  const int n_workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<TrialRecord> out;
  out.reserve(done.size());
  for (auto& [k, r] : done) out.push_back(std::move(r));
  if (csv.is_open()) {
    csv.close();
    write_trials_csv(opts.csv_path, out);
  }
  return out;
}

// ---------------------------------------------------------------- summary

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;  // most extreme data within 1.5 IQR of the box
  double whisker_hi = 0.0;
  double ci95 = 0.0;        // half-width, Student t
};

// Linear-interpolation quantile on sorted data (the common "type 7").
inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline SampleStats describe(std::vector<double> v) {
  SampleStats s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  const double iqr = s.q3 - s.q1;
  s.whisker_lo = s.q1;
  s.whisker_hi = s.q3;
  for (double x : v) {
    if (x >= s.q1 - 1.5 * iqr) {
      s.whisker_lo = std::min(s.whisker_lo, x);
      break;
    }
  }
  for (auto it = v.rbegin(); it != v.rend(); ++it) {
    if (*it <= s.q3 + 1.5 * iqr) {
      s.whisker_hi = std::max(s.whisker_hi, *it);
      break;
    }
  }
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    const boost::math::students_t dist(static_cast<double>(v.size() - 1));
    s.ci95 = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

struct CellSummary {
  std::string cell;
  int n_robots = 0;
  double cbuff = 0.0;
  double step_deg = 0.0;
  std::string arm;
  double greed = 1.0;
  double phobia = 0.0;
  Direction direction = Direction::reverse;
  std::size_t n_trials = 0;
  std::size_t n_errors = 0;
  SampleStats efficiency;
  SampleStats fold_time_s;
  double first_pass_convergence = 0.0;  // fraction of ok trials
  double mean_replaced = 0.0;
  double median_deadlock_group = 0.0;   // over all first-pass groups; 0 if none
  int max_deadlock_group = 0;
  std::optional<double> mean_tau_pg_s;
  std::optional<double> total_tau_sr_s;
  std::optional<double> mean_tau_sr_s;
  std::optional<int> max_points;
  std::optional<std::size_t> verify_collisions;  // summed over trials
};

// Groups by cell key in first-appearance order (run_campaign output is in
// spec order).
inline std::vector<CellSummary> aggregate(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw PreconditionError("aggregate needs at least one record");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrialRecord*>> by;
  for (const auto& r : records) {
    if (!by.count(r.cell)) order.push_back(r.cell);
    by[r.cell].push_back(&r);
  }
  std::vector<CellSummary> out;
  for (const auto& key : order) {
    const auto& rs = by[key];
    CellSummary s;
    const TrialRecord& f = *rs.front();
    s.cell = key;
    s.n_robots = f.n_robots;
    s.cbuff = f.cbuff;
    s.step_deg = f.step_deg;
    s.arm = f.arm;
    s.greed = f.greed;
    s.phobia = f.phobia;
    s.direction = f.direction;
    s.n_trials = rs.size();
    std::vector<double> eff, fold, pg, sr;
    std::vector<double> groups;
    std::size_t conv = 0;
    double replaced = 0.0;
    bool have_pg = true;
    bool have_sr = true;
    for (const TrialRecord* r : rs) {
      if (!r->ok) {
        ++s.n_errors;
        continue;
      }
      eff.push_back(r->efficiency);
      fold.push_back(r->fold_time_s);
      conv += r->converged_first_pass ? 1 : 0;
      replaced += r->n_replaced;
      for (int g : r->deadlock_group_sizes) {
        groups.push_back(g);
        s.max_deadlock_group = std::max(s.max_deadlock_group, g);
      }
      if (r->tau_pg_s) pg.push_back(*r->tau_pg_s); else have_pg = false;
      if (r->tau_sr_s) sr.push_back(*r->tau_sr_s); else have_sr = false;
      if (r->max_points) s.max_points = std::max(s.max_points.value_or(0), *r->max_points);
      if (r->verify_collisions) s.verify_collisions = s.verify_collisions.value_or(0) + *r->verify_collisions;
    }
    s.efficiency = describe(eff);
    s.fold_time_s = describe(fold);
    if (!eff.empty()) {
      s.first_pass_convergence = static_cast<double>(conv) / static_cast<double>(eff.size());
      s.mean_replaced = replaced / static_cast<double>(eff.size());
    }
    if (!groups.empty()) {
      std::sort(groups.begin(), groups.end());
      s.median_deadlock_group = quantile_sorted(groups, 0.5);
    }
    if (have_pg && !pg.empty()) s.mean_tau_pg_s = describe(pg).mean;
    if (have_sr && !sr.empty()) {
      double t = 0.0;
      for (double x : sr) t += x;
      s.total_tau_sr_s = t;
      s.mean_tau_sr_s = t / static_cast<double>(sr.size());
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{
      "cell", "n_robots", "cbuff_mm", "step_deg", "arm", "greed", "phobia", "direction",
      "n_trials", "n_errors",
      "eff_mean", "eff_min", "eff_max", "eff_q1", "eff_median", "eff_q3", "eff_whisker_lo",
      "eff_whisker_hi", "eff_ci95",
      "fold_mean_s", "fold_min_s", "fold_max_s", "fold_q1_s", "fold_median_s", "fold_q3_s",
      "fold_whisker_lo_s", "fold_whisker_hi_s", "fold_ci95_s",
      "first_pass_convergence", "mean_replaced", "median_deadlock_group", "max_deadlock_group",
      "mean_tau_pg_s", "total_tau_sr_s", "mean_tau_sr_s", "max_points", "verify_collisions"};
  return cols;
}

inline std::string summary_csv(const std::vector<CellSummary>& rows) {
  using namespace detail;
  std::string text;
  for (const auto& c : summary_columns()) text += (text.empty() ? "" : ",") + c;
  text += "\n";
  auto stats = [](const SampleStats& s, std::vector<std::string>& f) {
    for (double v : {s.mean, s.min, s.max, s.q1, s.median, s.q3, s.whisker_lo, s.whisker_hi, s.ci95}) {
      f.push_back(s.n ? fmt_num(v) : "");
    }
  };
  for (const auto& r : rows) {
    std::vector<std::string> f{r.cell, std::to_string(r.n_robots), fmt_num(r.cbuff),
                               fmt_num(r.step_deg), r.arm, fmt_num(r.greed), fmt_num(r.phobia),
                               direction_name(r.direction), std::to_string(r.n_trials),
                               std::to_string(r.n_errors)};
    stats(r.efficiency, f);
    stats(r.fold_time_s, f);
    f.push_back(fmt_num(r.first_pass_convergence));
    f.push_back(fmt_num(r.mean_replaced));
    f.push_back(fmt_num(r.median_deadlock_group));
    f.push_back(std::to_string(r.max_deadlock_group));
    f.push_back(fmt_opt(r.mean_tau_pg_s));
    f.push_back(fmt_opt(r.total_tau_sr_s));
    f.push_back(fmt_opt(r.mean_tau_sr_s));
    f.push_back(fmt_opt(r.max_points));
    f.push_back(fmt_opt(r.verify_collisions));
    for (std::size_t k = 0; k < f.size(); ++k) text += (k ? "," : "") + f[k];
    text += "\n";
  }
  return text;
}

inline json summary_json(const std::vector<CellSummary>& rows) {
  auto stats = [](const SampleStats& s) {
    return json{{"n", s.n},         {"mean", s.mean},       {"min", s.min},
                {"max", s.max},     {"q1", s.q1},           {"median", s.median},
                {"q3", s.q3},       {"whisker_lo", s.whisker_lo}, {"whisker_hi", s.whisker_hi},
                {"ci95", s.ci95}};
  };
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  json cells = json::array();
  for (const auto& r : rows) {
    cells.push_back({{"cell", r.cell},
                     {"n_robots", r.n_robots},
                     {"cbuff_mm", r.cbuff},
                     {"step_deg", r.step_deg},
                     {"arm", r.arm},
                     {"greed", r.greed},
                     {"phobia", r.phobia},
                     {"direction", detail::direction_name(r.direction)},
                     {"n_trials", r.n_trials},
                     {"n_errors", r.n_errors},
                     {"efficiency", stats(r.efficiency)},
                     {"fold_time_s", stats(r.fold_time_s)},
                     {"first_pass_convergence", r.first_pass_convergence},
                     {"mean_replaced", r.mean_replaced},
                     {"median_deadlock_group", r.median_deadlock_group},
                     {"max_deadlock_group", r.max_deadlock_group},
                     {"mean_tau_pg_s", opt(r.mean_tau_pg_s)},
                     {"total_tau_sr_s", opt(r.total_tau_sr_s)},
                     {"mean_tau_sr_s", opt(r.mean_tau_sr_s)},
                     {"max_points", opt(r.max_points)},
                     {"verify_collisions", opt(r.verify_collisions)}});
  }
  return {{"cells", cells}};
}

}  // namespace foldplan
