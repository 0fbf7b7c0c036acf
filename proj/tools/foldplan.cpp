// foldplan command line: solve, plan, campaign, verify, grid-info.
//
// Exit codes: 0 ok, 2 usage or invalid parameters, 3 deadlock or unresolved
// replacement, 4 verification failure or point budget exceeded, 5 file I/O or
// parse error.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "foldplan/foldplan.hpp"

namespace fp = foldplan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDeadlock = 3;
constexpr int kExitVerify = 4;
constexpr int kExitIo = 5;

struct Physical {
  int robots = 547;
  double cbuff = 2.5;
  double pitch = 22.4;
  double alpha_len = 7.4;
  double beta_len = 15.0;
  double axis_speed = 30.0;

  fp::ArmGeometry geom() const { return {alpha_len, beta_len}; }

  void add(CLI::App* app) {
    app->add_option("--robots", robots, "Robot count, a centered hexagonal number")->capture_default_str();
    app->add_option("--cbuff", cbuff, "Collision buffer, mm")->capture_default_str();
    app->add_option("--pitch", pitch, "Lattice pitch, mm")->capture_default_str();
    app->add_option("--alpha-len", alpha_len, "Alpha arm length, mm")->capture_default_str();
    app->add_option("--beta-len", beta_len, "Beta arm length, mm")->capture_default_str();
    app->add_option("--axis-speed", axis_speed, "Axis speed, deg/s")->capture_default_str();
  }
};

struct Stepping {
  double step = 0.1;
  double greed = 1.0;
  double phobia = 0.0;
  std::uint64_t seed = 0;
  std::string dest = "10,170";
  std::optional<int> max_steps;

  void add(CLI::App* app) {
    app->add_option("--step", step, "Step size, deg")->capture_default_str();
    app->add_option("--greed", greed, "Greed in [0, 1]")->capture_default_str();
    app->add_option("--phobia", phobia, "Phobia in [0, 1]")->capture_default_str();
    app->add_option("--seed", seed, "Seed for targets and stepper")->capture_default_str();
    app->add_option("--dest", dest, "Fold pose \"alpha,beta\", deg")->capture_default_str();
    app->add_option("--max-steps", max_steps, "Sweep cap (default ceil(1000/step))");
  }

  fp::AngularPose fold() const {
    std::istringstream in(dest);
    double a = 0.0;
    double b = 0.0;
    char comma = 0;
    if (!(in >> a >> comma >> b) || comma != ',' || !(in >> std::ws).eof()) {
      throw fp::ConfigError("--dest expects \"alpha,beta\", got '" + dest + "'");
    }
    return {a, b};
  }

  fp::SolveConfig solve_config(double axis_speed, fp::Direction dir) const {
    fp::SolveConfig sc;
    sc.step_deg = step;
    sc.greed = greed;
    sc.phobia = phobia;
    sc.max_steps = max_steps;
    sc.direction = dir;
    sc.rng_seed = fp::derive_seed(seed, 2);
    sc.axis_speed = axis_speed;
    sc.validate();
    return sc;
  }
};

void write_json(const std::string& path, const fp::json& j) {
  if (path.empty()) return;
  fp::write_text_file(path, j.dump(1) + "\n");
}

fp::GridConfiguration random_sources(const Physical& ph, const Stepping& st) {
  const auto layout = fp::build_hex_grid(ph.robots, ph.pitch, ph.geom(), ph.cbuff);
  auto config = fp::assign_random_targets(layout, fp::derive_seed(st.seed, 1),
                                          fp::max_displacement(ph.geom(), st.step));
  fp::set_folded_destination(config, st.fold());
  return config;
}

int cmd_solve(const Physical& ph, const Stepping& st, const std::string& direction,
              const std::string& out, const std::string& config_out, bool omit_timing) {
  const fp::Direction dir = fp::detail::direction_from_string(direction);
  auto config = random_sources(ph, st);
  if (dir == fp::Direction::forward) {
    for (auto& s : config.states) {
      s.destination = s.initial;
      s.initial = st.fold();
      s.current = s.initial;
    }
  }
  const auto outcome = fp::solve(config, st.solve_config(ph.axis_speed, dir));
  write_json(out, fp::trajectory_to_json(outcome.trajectories));
  write_json(config_out, fp::configuration_to_json(config));
  std::cout << fp::outcome_to_json(outcome, !omit_timing).dump(1) << "\n";
  return outcome.converged ? 0 : kExitDeadlock;
}

struct PlanOptions {
  int max_rounds = 100;
  bool single = false;
  std::optional<int> window;
  double accel_limit = 5000.0;
  double epsilon = 0.05;
  double sigma_smooth = 0.03;
  std::string out;
  std::string raw_out;
  std::string report_out;
  std::string layout_out;
  std::string config_out;
};

int cmd_plan(const Physical& ph, const Stepping& st, const PlanOptions& po, bool omit_timing) {
  const auto config = random_sources(ph, st);
  fp::ReplacementOptions ro;
  ro.max_rounds = po.max_rounds;
  ro.mode = po.single ? fp::ReplacementMode::single : fp::ReplacementMode::per_group;
  ro.source_slack = fp::max_displacement(ph.geom(), st.step);
  const auto rep = fp::solve_with_replacement(config, st.solve_config(ph.axis_speed, fp::Direction::reverse), ro);

  fp::json report = {{"replacement", fp::replacement_to_json(rep, config.size(), !omit_timing)}};
  write_json(po.layout_out, fp::layout_to_json(config.layout));
  write_json(po.config_out, fp::configuration_to_json(rep.final_sources));
  const auto& raw = rep.final_outcome.trajectories;
  write_json(po.raw_out, fp::trajectory_to_json(raw));
  if (!rep.converged()) {
    write_json(po.report_out, report);
    std::cout << report.dump(1) << "\n";
    return kExitDeadlock;
  }

  const int w = po.window ? *po.window
                          : fp::default_smoothing_window(st.step, ph.axis_speed, po.accel_limit);
  fp::Trajectory t = raw;
  if (w <= raw.last_step() + 1) t = fp::smooth_velocity(raw, w);
  t = fp::simplify_rdp(t, po.epsilon);
  const double check = ph.cbuff - po.sigma_smooth;
  const auto ver = fp::verify_trajectory(t, config.layout, check, 0.5 * raw.dt());
  report["postprocess"] = {{"window", w}, {"epsilon_deg", po.epsilon}, {"check_cbuff_mm", check}};
  report["verification"] = fp::verification_to_json(ver);
  write_json(po.out, fp::trajectory_to_json(t));
  write_json(po.report_out, report);
  std::cout << report.dump(1) << "\n";
  return ver.clean() ? 0 : kExitVerify;
}

int cmd_campaign(const std::string& spec_path, const std::string& out, const std::string& summary,
                 int workers, bool resume, bool omit_timing, bool quiet) {
  const auto spec = fp::campaign_spec_from_json(fp::load_json_file(spec_path), spec_path);
  fp::CampaignOptions co;
  co.workers = workers;
  co.csv_path = out;
  co.resume = resume;
  co.with_timing = !omit_timing;
  if (!quiet) {
    co.on_record = [](const fp::TrialRecord& r, std::size_t done, std::size_t total) {
      std::fprintf(stderr, "[%zu/%zu] %s trial %d %s eff %.4f\n", done, total, r.cell.c_str(),
                   r.trial, r.ok ? "ok" : "error", r.efficiency);
    };
  }
  const auto records = fp::run_campaign(spec, co);
  const auto rows = fp::aggregate(records);
  if (!summary.empty()) {
    fp::write_text_file(summary + ".csv", fp::summary_csv(rows));
    write_json(summary + ".json", fp::summary_json(rows));
  }
  std::cout << fp::summary_csv(rows);
  return 0;
}

int cmd_verify(const std::string& traj_path, const std::string& layout_path,
               std::optional<double> cbuff, std::optional<double> dt, const std::string& out) {
  const auto traj = fp::trajectory_from_json(fp::load_json_file(traj_path), traj_path);
  const auto layout = fp::layout_from_json(fp::load_json_file(layout_path), layout_path);
  const auto rep = fp::verify_trajectory(traj, layout, cbuff.value_or(layout.cbuff),
                                         dt.value_or(0.25 * traj.dt()));
  const auto j = fp::verification_to_json(rep);
  write_json(out, j);
  std::cout << j.dump(1) << "\n";
  return rep.clean() ? 0 : kExitVerify;
}

int cmd_grid_info(const Physical& ph, double step, const std::string& layout_out) {
  const auto layout = fp::build_hex_grid(ph.robots, ph.pitch, ph.geom(), ph.cbuff);
  std::size_t lo = layout.size();
  std::size_t hi = 0;
  for (const auto& n : layout.neighbors) {
    lo = std::min(lo, n.size());
    hi = std::max(hi, n.size());
  }
  fp::json j = {{"n_robots", layout.size()},
                {"pitch_mm", ph.pitch},
                {"cbuff_mm", ph.cbuff},
                {"neighbor_threshold_mm", layout.neighbor_threshold()},
                {"neighbors_min", lo},
                {"neighbors_max", hi},
                {"patrol_annulus_mm", {ph.geom().inner_radius(), ph.geom().reach()}},
                {"step_deg", step},
                {"max_displacement_mm", fp::max_displacement(ph.geom(), step)}};
  try {
    j["safe_beta_deg"] = fp::safe_beta_threshold(ph.geom(), ph.pitch, ph.cbuff);
  } catch (const fp::InfeasibleError&) {
    j["safe_beta_deg"] = nullptr;
  }
  write_json(layout_out, fp::layout_to_json(layout));
  std::cout << j.dump(1) << "\n";
  return 0;
}

int default_workers() {
  if (const char* env = std::getenv("FOLDPLAN_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision-free fold/unfold planning for hexagonal fiber positioner arrays"};
  app.require_subcommand(1);
  app.fallthrough();
  bool omit_timing = false;
  app.add_flag("--omit-timing", omit_timing, "Leave wall-clock fields out so output is byte-stable");

  Physical ph;
  Stepping st;
  std::string direction = "rev";
  std::string solve_out;
  std::string solve_cfg_out;
  auto* solve = app.add_subcommand("solve", "Random targets, one solve, no replacement");
  ph.add(solve);
  st.add(solve);
  solve->add_option("--direction", direction, "fwd (fold -> targets) or rev (targets -> fold, reflected)")
      ->check(CLI::IsMember({"fwd", "rev", "forward", "reverse"}))
      ->capture_default_str();
  solve->add_option("--out", solve_out, "Trajectory JSON path");
  solve->add_option("--config-out", solve_cfg_out, "Start/destination JSON path");

  Physical ph_plan;
  Stepping st_plan;
  PlanOptions po;
  auto* plan = app.add_subcommand("plan", "Replacement loop, smoothing, simplification, verification");
  ph_plan.add(plan);
  st_plan.add(plan);
  plan->add_option("--max-rounds", po.max_rounds, "Generator pass cap")->capture_default_str();
  plan->add_flag("--single-replacement", po.single, "Replace one robot per pass instead of one per group");
  plan->add_option("--window", po.window, "Smoothing window, odd steps");
  plan->add_option("--accel-limit", po.accel_limit, "Acceleration limit for the default window, deg/s^2")
      ->capture_default_str();
  plan->add_option("--epsilon", po.epsilon, "Simplification tolerance, deg")->capture_default_str();
  plan->add_option("--sigma-smooth", po.sigma_smooth, "Buffer reduction for verification, mm")
      ->capture_default_str();
  plan->add_option("--out", po.out, "Final trajectory JSON path");
  plan->add_option("--raw-out", po.raw_out, "Raw trajectory JSON path");
  plan->add_option("--report-out", po.report_out, "Report JSON path");
  plan->add_option("--layout-out", po.layout_out, "Layout JSON path");
  plan->add_option("--config-out", po.config_out, "Final sources JSON path");

  std::string spec_path;
  std::string campaign_out = "trials.csv";
  std::string summary_prefix;
  int workers = default_workers();
  bool resume = false;
  bool quiet = false;
  auto* campaign = app.add_subcommand("campaign", "Run a campaign spec; trials to CSV, summary to stdout");
  campaign->add_option("--spec", spec_path, "Campaign spec JSON")->required();
  campaign->add_option("--out", campaign_out, "Trial CSV path")->capture_default_str();
  campaign->add_option("--summary", summary_prefix, "Write <prefix>.csv and <prefix>.json");
  campaign->add_option("--workers", workers, "Worker threads (default $FOLDPLAN_WORKERS or cores)")
      ->check(CLI::PositiveNumber);
  campaign->add_flag("--resume", resume, "Skip (cell, trial) rows already in the CSV");
  campaign->add_flag("--quiet", quiet, "No progress lines");

  std::string traj_path;
  std::string layout_path;
  std::optional<double> verify_cbuff;
  std::optional<double> verify_dt;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Replay a trajectory against a layout");
  verify->add_option("--trajectory", traj_path, "Trajectory JSON")->required();
  verify->add_option("--layout", layout_path, "Layout JSON")->required();
  verify->add_option("--cbuff", verify_cbuff, "Check buffer, mm (default: layout cbuff)");
  verify->add_option("--dt", verify_dt, "Sample spacing, s (default: a quarter step)");
  verify->add_option("--out", verify_out, "Report JSON path");

  Physical ph_info;
  double info_step = 0.1;
  std::string info_layout_out;
  auto* info = app.add_subcommand("grid-info", "Neighbor statistics and fold threshold");
  ph_info.add(info);
  info->add_option("--step", info_step, "Step size for the displacement bound, deg")->capture_default_str();
  info->add_option("--layout-out", info_layout_out, "Layout JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(ph, st, direction, solve_out, solve_cfg_out, omit_timing);
    if (*plan) return cmd_plan(ph_plan, st_plan, po, omit_timing);
    if (*campaign) {
      return cmd_campaign(spec_path, campaign_out, summary_prefix, workers, resume, omit_timing, quiet);
    }
    if (*verify) return cmd_verify(traj_path, layout_path, verify_cbuff, verify_dt, verify_out);
    if (*info) return cmd_grid_info(ph_info, info_step, info_layout_out);
  } catch (const fp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fp::BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerify;
  } catch (const fp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
