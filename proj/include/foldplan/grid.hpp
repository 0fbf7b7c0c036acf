#pragma once

// Hexagonal positioner arrays: layout, neighbor graph, per-robot state and
// random right-armed target assignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "foldplan/errors.hpp"
#include "foldplan/geometry.hpp"
#include "foldplan/random.hpp"

namespace foldplan {

struct GridLayout {
  std::vector<Point2> robots;
  ArmGeometry geom;
  double pitch = 22.4;
  double cbuff = 2.5;
  std::vector<std::vector<int>> neighbors;

  std::size_t size() const { return robots.size(); }

  // Center-to-center distance at or below which two robots may interact.
  double neighbor_threshold() const { return 2.0 * (geom.alpha_len + geom.beta_len + cbuff); }
};

struct RobotState {
  int index = 0;
  AngularPose current;
  AngularPose initial;
  AngularPose destination;
  bool offline = false;
};

struct GridConfiguration {
  GridLayout layout;
  std::vector<RobotState> states;

  std::size_t size() const { return states.size(); }

  Segment2 segment(std::size_t i) const {
    return beta_arm_segment(layout.robots[i], layout.geom, states[i].current);
  }
};

// True when n = 3k(k+1) + 1 for some k >= 0.
inline bool is_centered_hexagonal(std::int64_t n) {
  if (n < 1) return false;
  std::int64_t k = 0;
  while (3 * k * (k + 1) + 1 < n) ++k;
  return 3 * k * (k + 1) + 1 == n;
}

inline std::vector<std::vector<int>> compute_neighbors(const std::vector<Point2>& robots,
                                                       double threshold) {
  std::vector<std::vector<int>> out(robots.size());
  // Lattice distances that equal the threshold exactly must count.
  const double thr_sq = threshold * threshold * (1.0 + 1e-12);
  for (std::size_t i = 0; i < robots.size(); ++i) {
    for (std::size_t j = i + 1; j < robots.size(); ++j) {
      if (norm_sq(robots[i] - robots[j]) <= thr_sq) {
        out[i].push_back(static_cast<int>(j));
        out[j].push_back(static_cast<int>(i));
      }
    }
  }
  for (auto& list : out) std::sort(list.begin(), list.end());
  return out;
}

// Concentric hexagonal rings about the origin, ring-major order: center
// first, then each ring counterclockwise starting on +x. One lattice row lies
// along +x.
inline GridLayout build_hex_grid(int n_robots, double pitch, const ArmGeometry& geom,
                                 double cbuff) {
  geom.validate();
  if (!(pitch > 0.0)) throw ConfigError("pitch must be positive");
  if (!(cbuff >= 0.0)) throw ConfigError("collision buffer must be non-negative");
  if (!is_centered_hexagonal(n_robots)) {
    std::int64_t k = 0;
    while (3 * k * (k + 1) + 1 < n_robots) ++k;
    std::ostringstream msg;
    msg << "robot count " << n_robots << " is not a centered hexagonal number (3k(k+1)+1)";
    if (k > 0) msg << "; nearest valid counts are " << 3 * (k - 1) * k + 1 << " and ";
    else msg << "; nearest valid count is ";
    msg << 3 * k * (k + 1) + 1;
    throw ConfigError(msg.str());
  }

  GridLayout layout;
  layout.geom = geom;
  layout.pitch = pitch;
  layout.cbuff = cbuff;
  layout.robots.reserve(static_cast<std::size_t>(n_robots));
  layout.robots.push_back({0.0, 0.0});
  const int rings = [&] {
    int k = 0;
    while (3 * k * (k + 1) + 1 < n_robots) ++k;
    return k;
  }();
  for (int k = 1; k <= rings; ++k) {
    for (int side = 0; side < 6; ++side) {
      const double corner_ang = 60.0 * side * kDegToRad;
      const double edge_ang = (60.0 * side + 120.0) * kDegToRad;
      const Point2 corner{k * pitch * std::cos(corner_ang), k * pitch * std::sin(corner_ang)};
      const Point2 edge{pitch * std::cos(edge_ang), pitch * std::sin(edge_ang)};
      for (int s = 0; s < k; ++s) layout.robots.push_back(corner + static_cast<double>(s) * edge);
    }
  }
  layout.neighbors = compute_neighbors(layout.robots, layout.neighbor_threshold());
  return layout;
}

// All robots at `pose` (current, initial and destination).
inline GridConfiguration make_configuration(const GridLayout& layout, AngularPose pose = {0.0, 180.0}) {
  GridConfiguration config;
  config.layout = layout;
  config.states.resize(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    config.states[i] = RobotState{static_cast<int>(i), pose, pose, pose, false};
  }
  return config;
}

// Minimum beta-arm distance from robot i to any neighbor at current poses;
// +inf without neighbors.
inline double min_neighbor_distance(const GridConfiguration& config, std::size_t i) {
  const Segment2 seg = config.segment(i);
  double best = std::numeric_limits<double>::infinity();
  for (int j : config.layout.neighbors[i]) {
    best = std::min(best, segment_min_distance_sq(seg, config.segment(static_cast<std::size_t>(j))));
  }
  return std::sqrt(best);
}

// Robot i collided with a neighbor: min D_ij <= 2*cbuff + slack.
// slack = 0 is the plain collision test, slack = MD the stepping margin and
// slack = 3*MD the encroachment horizon.
inline bool is_collided(const GridConfiguration& config, std::size_t i, double slack = 0.0) {
  const double limit = 2.0 * config.layout.cbuff + slack;
  const double limit_sq = limit * limit;
  const Segment2 seg = config.segment(i);
  for (int j : config.layout.neighbors[i]) {
    if (segment_min_distance_sq(seg, config.segment(static_cast<std::size_t>(j))) <= limit_sq) {
      return true;
    }
  }
  return false;
}

inline bool any_collided(const GridConfiguration& config, double slack = 0.0) {
  for (std::size_t i = 0; i < config.size(); ++i) {
    if (is_collided(config, i, slack)) return true;
  }
  return false;
}

// Fiber point uniform by area over the patrol annulus, as a right-armed pose.
inline AngularPose sample_annulus_pose(const ArmGeometry& geom, Rng& rng) {
  const double r_in = geom.inner_radius();
  const double r_out = geom.reach();
  const double r = std::sqrt(r_in * r_in + uniform01(rng) * (r_out * r_out - r_in * r_in));
  const double theta = uniform01(rng) * 2.0 * std::numbers::pi;
  return inverse_kinematics_right_arm({0.0, 0.0}, geom, {r * std::cos(theta), r * std::sin(theta)});
}

inline constexpr int kMaxRedraws = 10000;

// Redraws robot i's current pose until it is clear of every robot j with
// consider(j) true. Returns false when the redraw cap is hit (pose left at the
// last draw).
template <typename Pred>
bool redraw_clear(GridConfiguration& config, std::size_t i, Rng& rng, Pred consider,
                  double slack = 0.0) {
  const double limit = 2.0 * config.layout.cbuff + slack;
  const double limit_sq = limit * limit;
  const Point2 base = config.layout.robots[i];
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    config.states[i].current = sample_annulus_pose(config.layout.geom, rng);
    const Segment2 seg = beta_arm_segment(base, config.layout.geom, config.states[i].current);
    bool clear = true;
    for (int j : config.layout.neighbors[i]) {
      if (!consider(static_cast<std::size_t>(j))) continue;
      if (segment_min_distance_sq(seg, config.segment(static_cast<std::size_t>(j))) <= limit_sq) {
        clear = false;
        break;
      }
    }
    if (clear) return true;
  }
  return false;
}

inline constexpr int kMaxUnjams = 100;

// Random non-colliding right-armed targets, assigned in index order; a draw
// colliding with an already-assigned robot is redrawn. If robot i cannot be
// placed, a random earlier neighbor is redrawn and i tried again (at most
// kMaxUnjams times per robot). Targets are stored as current and initial
// poses; destinations default to the folded (0, 180).
inline GridConfiguration assign_random_targets(const GridLayout& layout, std::uint64_t rng_seed,
                                               double slack = 0.0) {
  GridConfiguration config = make_configuration(layout);
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    auto earlier = [i](std::size_t j) { return j < i; };
    int unjams = 0;
    while (!redraw_clear(config, i, rng, earlier, slack)) {
      std::vector<int> placed;
      for (int j : layout.neighbors[i]) {
        if (static_cast<std::size_t>(j) < i) placed.push_back(j);
      }
      if (placed.empty() || ++unjams > kMaxUnjams) {
        std::ostringstream msg;
        msg << "robot " << i << ": no collision-free target after " << kMaxRedraws
            << " draws (collision buffer too large for this density)";
        throw InfeasibleError(msg.str());
      }
      const auto k = static_cast<std::size_t>(placed[uniform_index(rng, placed.size())]);
      if (redraw_clear(config, k, rng, [i, k](std::size_t j) { return j < i && j != k; }, slack)) {
        config.states[k].initial = config.states[k].current;
      } else {
        config.states[k].current = config.states[k].initial;
      }
    }
    config.states[i].initial = config.states[i].current;
  }
  return config;
}

// Sets every destination to `pose`; rejects a fold that collides lattice-wide.
inline void set_folded_destination(GridConfiguration& config, AngularPose pose) {
  if (!within_travel_limits(pose)) throw PreconditionError("fold pose outside travel limits");
  GridConfiguration probe = make_configuration(config.layout, pose);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (is_collided(probe, i)) {
      std::ostringstream msg;
      msg << "fold pose (" << pose.alpha << ", " << pose.beta
          << ") collides when adopted by every robot (robot " << i << ")";
      throw PreconditionError(msg.str());
    }
  }
  for (auto& s : config.states) s.destination = pose;
}

}  // namespace foldplan
