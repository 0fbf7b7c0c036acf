#pragma once

// Distributed stepwise path generator. Every sweep visits robots in index
// order and updates each in place (later robots see earlier robots' new
// poses). greed = 1, phobia = 0 gives the greedy-choice stepper; other
// values give the Markov-chain variant.
//
// Random draw order (part of the reproducibility contract). One mt19937_64
// seeded with SolveConfig::rng_seed is used for the whole solve. For each
// visited robot:
//   1. stationary check (cost 0, nobody encroaching): no draws, robot skipped;
//   2. metric choice: one uniform01 draw, energy when draw < phobia;
//   3. candidate order: Fisher-Yates over the nine moves (8 uniform_index
//      draws); the order array persists between robots and sweeps;
//   4. per candidate that clears the approach margin: one uniform01 draw if
//      its score is strictly better (accept when draw < greed), otherwise one
//      draw if it ties the best score (accept when draw < 0.5).
// Offline robots are never visited and draw nothing.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "foldplan/errors.hpp"
#include "foldplan/geometry.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/random.hpp"
#include "foldplan/trajectory.hpp"

namespace foldplan {

enum class Direction { forward, reverse };

struct SolveConfig {
  double step_deg = 0.1;
  std::optional<int> max_steps;  // defaults to ceil(1000 deg / step_deg)
  double greed = 1.0;
  double phobia = 0.0;
  Direction direction = Direction::reverse;
  std::uint64_t rng_seed = 0;
  double axis_speed = 30.0;  // deg/s

  int effective_max_steps() const {
    if (max_steps) return *max_steps;
    return static_cast<int>(std::ceil(1000.0 / step_deg - 1e-9));
  }

  void validate() const {
    if (!(step_deg > 0.0)) throw ConfigError("step_deg must be positive");
    if (effective_max_steps() < 1) throw ConfigError("max_steps must be >= 1");
    if (!(greed >= 0.0 && greed <= 1.0)) throw ConfigError("greed must lie in [0, 1]");
    if (!(phobia >= 0.0 && phobia <= 1.0)) throw ConfigError("phobia must lie in [0, 1]");
    if (!(axis_speed > 0.0)) throw ConfigError("axis_speed must be positive");
  }
};

inline SolveConfig greedy_config(double step_deg, std::uint64_t seed = 0) {
  SolveConfig c;
  c.step_deg = step_deg;
  c.rng_seed = seed;
  return c;
}

inline SolveConfig markov_config(double step_deg, std::uint64_t seed = 0, double greed = 0.9,
                                 double phobia = 0.3) {
  SolveConfig c;
  c.step_deg = step_deg;
  c.greed = greed;
  c.phobia = phobia;
  c.rng_seed = seed;
  return c;
}

struct SolveOutcome {
  Trajectory trajectories;
  bool converged = false;
  std::vector<int> deadlocked_robots;
  int steps_used = 0;
  double wall_time = 0.0;  // seconds
  std::vector<AngularPose> final_poses;

  double fold_time(double step_deg, double axis_speed) const {
    return static_cast<double>(steps_used) * step_deg / axis_speed;
  }
};

// Bound on fiber motion in one step: (l_alpha + l_beta) sin(2 step).
inline double max_displacement(const ArmGeometry& geom, double step_deg) {
  return geom.reach() * std::sin(2.0 * step_deg * kDegToRad);
}

// Angular-space distance to destination, degrees, no wrapping.
inline double cost(AngularPose current, AngularPose destination) {
  const double da = current.alpha - destination.alpha;
  const double db = current.beta - destination.beta;
  return std::sqrt(da * da + db * db);
}

inline double cost(const RobotState& state) { return cost(state.current, state.destination); }

// Sum of 1/D^2 over neighbors; +inf when any D is zero.
inline double energy(const GridConfiguration& config, std::size_t i) {
  const Segment2 seg = config.segment(i);
  double e = 0.0;
  for (int j : config.layout.neighbors[i]) {
    const double d2 = segment_min_distance_sq(seg, config.segment(static_cast<std::size_t>(j)));
    if (d2 == 0.0) return std::numeric_limits<double>::infinity();
    e += 1.0 / d2;
  }
  return e;
}

namespace detail {

// Travel limits then no-overshoot, per axis.
inline double clamp_axis(double curr, double next, double dest) {
  if (next < 0.0) next = 0.0;
  if (next >= 360.0) next = 359.999;
  if (curr > dest && next <= dest) next = dest;
  if (curr < dest && next >= dest) next = dest;
  return next;
}

}  // namespace detail

// Owns the per-solve caches (beta segments and their midpoints) over a
// configuration it mutates in place.
class Stepper {
 public:
  Stepper(GridConfiguration& config, const SolveConfig& sc)
      : config_(config),
        step_(sc.step_deg),
        greed_(sc.greed),
        phobia_(sc.phobia),
        md_(foldplan::max_displacement(config.layout.geom, sc.step_deg)) {
    const double cb2 = 2.0 * config.layout.cbuff;
    approach_sq_ = (cb2 + md_) * (cb2 + md_);
    encroach_sq_ = (cb2 + 3.0 * md_) * (cb2 + 3.0 * md_);
    // Two segments of length l_beta whose midpoints are farther apart than
    // l_beta + limit cannot be within limit of each other.
    const double lb = config.layout.geom.beta_len;
    far_approach_sq_ = (lb + cb2 + md_) * (lb + cb2 + md_);
    far_encroach_sq_ = (lb + cb2 + 3.0 * md_) * (lb + cb2 + 3.0 * md_);
    std::size_t k = 0;
    for (int da = -1; da <= 1; ++da) {
      for (int db = -1; db <= 1; ++db) moves_[k++] = {da * step_, db * step_};
    }
    segs_.resize(config.size());
    mids_.resize(config.size());
    for (std::size_t i = 0; i < config.size(); ++i) refresh(i);
  }

  double approach_margin() const { return md_; }

  // One policy update for robot i. Returns true if its pose changed.
  bool perturb(std::size_t i, Rng& rng) {
    RobotState& st = config_.states[i];
    if (st.offline) return false;
    if (cost(st) == 0.0 && !encroached(i)) return false;

    const bool minimize_energy = uniform01(rng) < phobia_;
    shuffle(moves_, rng);

    const AngularPose curr = st.current;
    const AngularPose dest = st.destination;
    const Point2 base = config_.layout.robots[i];
    AngularPose best = curr;
    double best_score = 1e16;

    for (const auto& mv : moves_) {
      const AngularPose next{detail::clamp_axis(curr.alpha, curr.alpha + mv[0], dest.alpha),
                             detail::clamp_axis(curr.beta, curr.beta + mv[1], dest.beta)};
      const Segment2 seg = beta_arm_segment(base, config_.layout.geom, next);
      double score = 0.0;
      if (minimize_energy) {
        const auto e = approach_energy(i, seg);
        if (!e) continue;
        score = *e;
      } else {
        if (too_close(i, seg)) continue;
        score = cost(next, dest);
      }
      if (score < best_score && uniform01(rng) < greed_) {
        best = next;
        best_score = score;
      } else if (score == best_score && uniform01(rng) < 0.5) {
        best = next;
        best_score = score;
      }
    }

    if (best == curr) return false;
    st.current = best;
    refresh(i);
    return true;
  }

  // Moves robot i to `pose` without any checks (used by tests and replay).
  void place(std::size_t i, AngularPose pose) {
    config_.states[i].current = pose;
    refresh(i);
  }

 private:
  void refresh(std::size_t i) {
    segs_[i] = beta_arm_segment(config_.layout.robots[i], config_.layout.geom,
                                config_.states[i].current);
    mids_[i] = segs_[i].midpoint();
  }

  bool within(std::size_t i, const Segment2& seg, double limit_sq, double far_sq) const {
    const Point2 mid = seg.midpoint();
    for (int j : config_.layout.neighbors[i]) {
      const auto jj = static_cast<std::size_t>(j);
      if (norm_sq(mid - mids_[jj]) > far_sq) continue;
      if (segment_min_distance_sq(seg, segs_[jj]) <= limit_sq) return true;
    }
    return false;
  }

  bool encroached(std::size_t i) const {
    return within(i, segs_[i], encroach_sq_, far_encroach_sq_);
  }

  bool too_close(std::size_t i, const Segment2& seg) const {
    return within(i, seg, approach_sq_, far_approach_sq_);
  }

  // Energy of a candidate, or nullopt if it breaks the approach margin.
  std::optional<double> approach_energy(std::size_t i, const Segment2& seg) const {
    double e = 0.0;
    for (int j : config_.layout.neighbors[i]) {
      const double d2 = segment_min_distance_sq(seg, segs_[static_cast<std::size_t>(j)]);
      if (d2 <= approach_sq_) return std::nullopt;
      e += 1.0 / d2;
    }
    return e;
  }

  GridConfiguration& config_;
  double step_;
  double greed_;
  double phobia_;
  double md_;
  double approach_sq_ = 0.0;
  double encroach_sq_ = 0.0;
  double far_approach_sq_ = 0.0;
  double far_encroach_sq_ = 0.0;
  std::array<std::array<double, 2>, 9> moves_{};
  std::vector<Segment2> segs_;
  std::vector<Point2> mids_;
};

// Single policy update of robot i on `config` (fresh candidate order).
inline void perturb_robot(GridConfiguration& config, std::size_t i, const SolveConfig& sc,
                          Rng& rng) {
  Stepper stepper(config, sc);
  stepper.perturb(i, rng);
}

inline bool array_converged(const GridConfiguration& config) {
  for (const auto& s : config.states) {
    if (!s.offline && cost(s) > 0.0) return false;
  }
  return true;
}

namespace detail {

// Records raw knots: a knot whenever the pose changes, plus the last step of
// every hold, plus a closing knot at the final step.
class PathRecorder {
 public:
  explicit PathRecorder(const GridConfiguration& config) : last_(config.size()) {
    paths_.resize(config.size());
    for (std::size_t i = 0; i < config.size(); ++i) {
      paths_[i].index = static_cast<int>(i);
      push(i, 0, config.states[i].current);
    }
  }

  void moved(std::size_t i, std::int64_t step, AngularPose pose) {
    if (last_[i].step < step - 1) push(i, step - 1, last_[i].pose);
    push(i, step, pose);
  }

  std::vector<RobotPath> finish(std::int64_t final_step) {
    for (std::size_t i = 0; i < paths_.size(); ++i) {
      if (last_[i].step < final_step) push(i, final_step, last_[i].pose);
    }
    return std::move(paths_);
  }

 private:
  struct Last {
    std::int64_t step = -1;
    AngularPose pose;
  };

  void push(std::size_t i, std::int64_t step, AngularPose pose) {
    paths_[i].alpha.push_back({step, pose.alpha});
    paths_[i].beta.push_back({step, pose.beta});
    last_[i] = {step, pose};
  }

  std::vector<RobotPath> paths_;
  std::vector<Last> last_;
};

inline void check_start_and_destination(const GridConfiguration& config) {
  for (std::size_t i = 0; i < config.size(); ++i) {
    if (!within_travel_limits(config.states[i].current) ||
        !within_travel_limits(config.states[i].destination)) {
      std::ostringstream msg;
      msg << "robot " << i << " has a pose outside the travel limits";
      throw PreconditionError(msg.str());
    }
    if (is_collided(config, i)) {
      std::ostringstream msg;
      msg << "initial configuration collides at robot " << i;
      throw PreconditionError(msg.str());
    }
  }
  GridConfiguration dest = config;
  for (auto& s : dest.states) {
    if (!s.offline) s.current = s.destination;
  }
  for (std::size_t i = 0; i < dest.size(); ++i) {
    if (is_collided(dest, i)) {
      std::ostringstream msg;
      msg << "destination configuration collides at robot " << i;
      throw PreconditionError(msg.str());
    }
  }
}

}  // namespace detail

// Runs the stepper from each robot's initial pose until every online robot
// sits on its destination or max_steps sweeps have run. A reverse solve
// returns the recorded motion reflected in time. Offline robots hold their
// initial pose and are excluded from convergence.
inline SolveOutcome solve(const GridConfiguration& input, const SolveConfig& sc) {
  sc.validate();
  const auto t0 = std::chrono::steady_clock::now();

  GridConfiguration config = input;
  for (auto& s : config.states) s.current = s.initial;
  detail::check_start_and_destination(config);

  Rng rng(sc.rng_seed);
  Stepper stepper(config, sc);
  detail::PathRecorder recorder(config);
  const int max_steps = sc.effective_max_steps();

  int step = 0;
  bool converged = array_converged(config);
  while (!converged && step < max_steps) {
    ++step;
    for (std::size_t i = 0; i < config.size(); ++i) {
      if (stepper.perturb(i, rng)) recorder.moved(i, step, config.states[i].current);
    }
    converged = array_converged(config);
  }

  SolveOutcome out;
  out.converged = converged;
  out.steps_used = step;
  out.trajectories.step_deg = sc.step_deg;
  out.trajectories.axis_speed = sc.axis_speed;
  out.trajectories.stage = Stage::raw;
  out.trajectories.robots = recorder.finish(step);
  if (sc.direction == Direction::reverse) out.trajectories = reflect_in_time(out.trajectories);
  out.final_poses.reserve(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto& s = config.states[i];
    out.final_poses.push_back(s.current);
    if (!s.offline && cost(s) > 0.0) out.deadlocked_robots.push_back(static_cast<int>(i));
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace foldplan
