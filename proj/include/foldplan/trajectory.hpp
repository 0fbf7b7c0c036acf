#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "foldplan/errors.hpp"
#include "foldplan/geometry.hpp"

namespace foldplan {

enum class Stage { raw, smoothed, simplified };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::raw: return "raw";
    case Stage::smoothed: return "smoothed";
    case Stage::simplified: return "simplified";
  }
  return "raw";
}

inline Stage stage_from_string(std::string_view s) {
  if (s == "raw") return Stage::raw;
  if (s == "smoothed") return Stage::smoothed;
  if (s == "simplified") return Stage::simplified;
  throw ParseError("unknown trajectory stage '" + std::string(s) + "'");
}

// One (step, angle) knot. Motion between knots is linear in the step index.
struct Waypoint {
  std::int64_t step = 0;
  double angle = 0.0;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

using AxisPath = std::vector<Waypoint>;

// Linear interpolation on an axis path; clamps outside the covered range.
inline double angle_at(const AxisPath& path, double step) {
  if (path.empty()) return 0.0;
  if (step <= static_cast<double>(path.front().step)) return path.front().angle;
  if (step >= static_cast<double>(path.back().step)) return path.back().angle;
  auto it = std::upper_bound(path.begin(), path.end(), step, [](double s, const Waypoint& w) {
    return s < static_cast<double>(w.step);
  });
  const Waypoint& hi = *it;
  const Waypoint& lo = *(it - 1);
  const double f = (step - static_cast<double>(lo.step)) / static_cast<double>(hi.step - lo.step);
  return lo.angle + f * (hi.angle - lo.angle);
}

// Sequential reader for monotonically increasing query steps.
class AxisCursor {
 public:
  explicit AxisCursor(const AxisPath& path) : path_(&path) {}

  double at(double step) {
    const AxisPath& p = *path_;
    if (p.empty()) return 0.0;
    while (pos_ + 1 < p.size() && static_cast<double>(p[pos_ + 1].step) <= step) ++pos_;
    if (step <= static_cast<double>(p[pos_].step) || pos_ + 1 == p.size()) return p[pos_].angle;
    const Waypoint& lo = p[pos_];
    const Waypoint& hi = p[pos_ + 1];
    const double f = (step - static_cast<double>(lo.step)) / static_cast<double>(hi.step - lo.step);
    return lo.angle + f * (hi.angle - lo.angle);
  }

 private:
  const AxisPath* path_;
  std::size_t pos_ = 0;
};

struct RobotPath {
  int index = 0;
  AxisPath alpha;
  AxisPath beta;
};

// Per-robot, per-axis (step, angle) knots. Step k is at time k * step_deg /
// axis_speed seconds. Raw paths carry identical knot steps on both axes and
// keep a knot at both ends of every hold, so interpolation reproduces every
// recorded sweep exactly.
struct Trajectory {
  double step_deg = 1.0;
  double axis_speed = 30.0;
  Stage stage = Stage::raw;
  std::vector<RobotPath> robots;

  double dt() const { return step_deg / axis_speed; }

  std::int64_t last_step() const {
    std::int64_t s = 0;
    for (const auto& r : robots) {
      if (!r.alpha.empty()) s = std::max(s, r.alpha.back().step);
      if (!r.beta.empty()) s = std::max(s, r.beta.back().step);
    }
    return s;
  }

  double duration() const { return static_cast<double>(last_step()) * dt(); }

  AngularPose pose_at(std::size_t robot, double step) const {
    return {angle_at(robots[robot].alpha, step), angle_at(robots[robot].beta, step)};
  }
};

struct TimedPoint {
  double t = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

// Knot steps of both axes merged; each point carries both interpolated angles.
inline std::vector<std::vector<TimedPoint>> trajectory_to_timed(const Trajectory& traj) {
  if (!(traj.axis_speed > 0.0)) throw ConfigError("axis speed must be positive");
  const double dt = traj.dt();
  std::vector<std::vector<TimedPoint>> out;
  out.reserve(traj.robots.size());
  for (const auto& r : traj.robots) {
    std::vector<std::int64_t> steps;
    steps.reserve(r.alpha.size() + r.beta.size());
    for (const auto& w : r.alpha) steps.push_back(w.step);
    for (const auto& w : r.beta) steps.push_back(w.step);
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    std::vector<TimedPoint> pts;
    pts.reserve(steps.size());
    for (auto s : steps) {
      const double sd = static_cast<double>(s);
      pts.push_back({sd * dt, angle_at(r.alpha, sd), angle_at(r.beta, sd)});
    }
    out.push_back(std::move(pts));
  }
  return out;
}

// Time reflection: step k -> last - k, knot order reversed.
inline Trajectory reflect_in_time(const Trajectory& traj) {
  Trajectory out = traj;
  const std::int64_t last = traj.last_step();
  auto flip = [last](AxisPath& p) {
    std::reverse(p.begin(), p.end());
    for (auto& w : p) w.step = last - w.step;
  };
  for (auto& r : out.robots) {
    flip(r.alpha);
    flip(r.beta);
  }
  return out;
}

}  // namespace foldplan
