#pragma once

// Hardware adaptation of raw stepper paths: running-average velocity
// smoothing, per-axis Ramer-Douglas-Peucker simplification under a point
// budget, and re-verification on a fine time lattice.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "foldplan/errors.hpp"
#include "foldplan/geometry.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/trajectory.hpp"

namespace foldplan {

inline constexpr int kMaxAxisPoints = 1024;

struct PostprocessConfig {
  // Angular acceleration the smoothed profile must respect, deg/s^2. Sets the
  // default window through default_smoothing_window.
  double accel_limit = 5000.0;
  std::optional<int> window;     // odd; overrides the acceleration rule
  double epsilon = 0.05;         // RDP tolerance, degrees
  double sigma_smooth = 0.03;    // buffer given up for smoothing, mm
  int max_points = kMaxAxisPoints;
};

// A raw path can reverse direction every step, a velocity jump of
// 2 * axis_speed in one step. A box filter of width w divides that by w, so
// the peak acceleration is 2 * axis_speed^2 / (w * step_deg).
inline int default_smoothing_window(double step_deg, double axis_speed, double accel_limit) {
  if (!(step_deg > 0.0) || !(axis_speed > 0.0) || !(accel_limit > 0.0)) {
    throw ConfigError("step, speed and acceleration limit must be positive");
  }
  const double need = 2.0 * axis_speed * axis_speed / (step_deg * accel_limit);
  int w = std::max(1, static_cast<int>(std::ceil(need - 1e-9)));
  if (w % 2 == 0) ++w;
  return w;
}

namespace detail {

// Knots of a dense per-step sequence: first, last and every index where the
// slope changes.
inline AxisPath dense_to_knots(const std::vector<double>& v) {
  AxisPath out;
  if (v.empty()) return out;
  out.push_back({0, v[0]});
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    const double before = v[k] - v[k - 1];
    const double after = v[k + 1] - v[k];
    if (std::abs(after - before) > 1e-12) out.push_back({static_cast<std::int64_t>(k), v[k]});
  }
  if (v.size() > 1) out.push_back({static_cast<std::int64_t>(v.size() - 1), v.back()});
  return out;
}

// Full convolution of the per-step velocity with a width-w box, zero padded.
// Equivalent to averaging positions over the trailing w steps with the path
// held at its end angles outside [0, last]; the output runs last + w - 1
// steps and keeps both end angles.
inline AxisPath box_smooth_axis(const AxisPath& path, std::int64_t last, int w) {
  std::vector<double> raw(static_cast<std::size_t>(last + 1));
  AxisCursor cur(path);
  for (std::int64_t k = 0; k <= last; ++k) raw[static_cast<std::size_t>(k)] = cur.at(static_cast<double>(k));
  const std::int64_t out_last = last + w - 1;
  std::vector<double> out(static_cast<std::size_t>(out_last + 1));
  auto at = [&](std::int64_t k) {
    return raw[static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, last))];
  };
  // Sliding sum, re-summed periodically to keep round-off from drifting.
  double sum = 0.0;
  for (std::int64_t m = 0; m <= out_last; ++m) {
    if (m % 4096 == 0) {
      sum = 0.0;
      for (std::int64_t j = m - w + 1; j <= m; ++j) sum += at(j);
    } else {
      sum += at(m) - at(m - w);
    }
    out[static_cast<std::size_t>(m)] = sum / w;
  }
  out.front() = raw.front();
  out.back() = raw.back();
  return dense_to_knots(out);
}

}  // namespace detail

// Running-average velocity filter of odd width `window` steps, applied to
// every axis of every robot on a shared clock. The whole array is delayed by
// (window - 1) / 2 steps relative to the raw timing and the motion lasts
// window - 1 steps longer.
inline Trajectory smooth_velocity(const Trajectory& traj, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("smoothing window must be odd and >= 1");
  const std::int64_t last = traj.last_step();
  if (window > last + 1) {
    std::ostringstream msg;
    msg << "smoothing window " << window << " exceeds the trajectory length (" << last + 1
        << " samples)";
    throw PreconditionError(msg.str());
  }
  Trajectory out = traj;
  out.stage = Stage::smoothed;
  if (window == 1) return out;
  for (auto& r : out.robots) {
    r.alpha = detail::box_smooth_axis(r.alpha, last, window);
    r.beta = detail::box_smooth_axis(r.beta, last, window);
  }
  return out;
}

namespace detail {

// RDP on a piecewise-linear axis path. Deviation is measured along the angle
// axis (|angle - interpolant| at the knot's time), which is exactly the
// quantity bounded by epsilon.
inline AxisPath rdp_axis(const AxisPath& path, double epsilon) {
  const std::size_t n = path.size();
  if (n <= 2) return path;
  std::vector<char> keep(n, 0);
  keep[0] = 1;
  keep[n - 1] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    if (hi <= lo + 1) continue;
    const Waypoint& a = path[lo];
    const Waypoint& b = path[hi];
    const double span = static_cast<double>(b.step - a.step);
    double worst = -1.0;
    std::size_t at = lo;
    for (std::size_t k = lo + 1; k < hi; ++k) {
      const double f = static_cast<double>(path[k].step - a.step) / span;
      const double dev = std::abs(path[k].angle - (a.angle + f * (b.angle - a.angle)));
      if (dev > worst) {
        worst = dev;
        at = k;
      }
    }
    if (worst > epsilon) {
      keep[at] = 1;
      stack.push_back({lo, at});
      stack.push_back({at, hi});
    }
  }
  AxisPath out;
  for (std::size_t k = 0; k < n; ++k) {
    if (keep[k]) out.push_back(path[k]);
  }
  return out;
}

inline std::size_t max_axis_points(const Trajectory& traj) {
  std::size_t m = 0;
  for (const auto& r : traj.robots) m = std::max({m, r.alpha.size(), r.beta.size()});
  return m;
}

}  // namespace detail

// Smallest epsilon (to 1e-4 relative) meeting the point budget on every axis.
inline double required_epsilon(const Trajectory& traj, int max_points) {
  double lo = 0.0;
  double hi = 1.0;
  auto fits = [&](double eps) {
    for (const auto& r : traj.robots) {
      if (detail::rdp_axis(r.alpha, eps).size() > static_cast<std::size_t>(max_points)) return false;
      if (detail::rdp_axis(r.beta, eps).size() > static_cast<std::size_t>(max_points)) return false;
    }
    return true;
  };
  while (!fits(hi)) hi *= 2.0;
  while (hi - lo > 1e-4 * hi) {
    const double mid = 0.5 * (lo + hi);
    (fits(mid) ? hi : lo) = mid;
  }
  return hi;
}

// Per-axis RDP with tolerance `epsilon` degrees. Throws BudgetError when any
// axis keeps more than `max_points` knots.
inline Trajectory simplify_rdp(const Trajectory& traj, double epsilon,
                               int max_points = kMaxAxisPoints) {
  if (!(epsilon > 0.0)) throw ConfigError("RDP epsilon must be positive");
  if (max_points < 2) throw ConfigError("point budget must be >= 2");
  Trajectory out = traj;
  out.stage = Stage::simplified;
  for (auto& r : out.robots) {
    r.alpha = detail::rdp_axis(r.alpha, epsilon);
    r.beta = detail::rdp_axis(r.beta, epsilon);
  }
  if (detail::max_axis_points(out) > static_cast<std::size_t>(max_points)) {
    const double need = required_epsilon(traj, max_points);
    std::ostringstream msg;
    msg << "simplified path needs " << detail::max_axis_points(out) << " points at epsilon "
        << epsilon << " deg, budget is " << max_points << "; epsilon >= " << need
        << " deg fits";
    throw BudgetError(msg.str(), need);
  }
  return out;
}

struct CollisionViolation {
  int robot_i = 0;
  int robot_j = 0;
  double time_s = 0.0;
  double distance_mm = 0.0;
};

struct AxisViolation {
  enum class Kind { limit, speed };
  int robot = 0;
  char axis = 'a';  // 'a' alpha, 'b' beta
  Kind kind = Kind::limit;
  double time_s = 0.0;
  double value = 0.0;  // angle (deg) or speed (deg/s)
};

struct VerificationReport {
  std::vector<CollisionViolation> violations;  // first kMaxListed only
  std::size_t collision_count = 0;             // all (pair, sample) hits
  std::vector<AxisViolation> axis_violations;  // first kMaxListed only
  std::size_t axis_violation_count = 0;
  double min_distance_mm = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  std::size_t max_points_alpha = 0;
  std::size_t max_points_beta = 0;

  static constexpr std::size_t kMaxListed = 1000;

  bool clean() const { return collision_count == 0 && axis_violation_count == 0; }
};

// Samples every robot at t = k * dt (plus the final time) by linear
// interpolation and reports neighbor pairs with D <= 2 * check_cbuff, angles
// outside [0, 360) and per-sample axis speeds above the trajectory's axis
// speed.
inline VerificationReport verify_trajectory(const Trajectory& traj, const GridLayout& layout,
                                            double check_cbuff, double dt) {
  if (!(dt > 0.0)) throw ConfigError("verification dt must be positive");
  if (traj.robots.size() != layout.size()) {
    std::ostringstream msg;
    msg << "trajectory has " << traj.robots.size() << " robots, layout has " << layout.size();
    throw PreconditionError(msg.str());
  }
  VerificationReport rep;
  for (const auto& r : traj.robots) {
    rep.max_points_alpha = std::max(rep.max_points_alpha, r.alpha.size());
    rep.max_points_beta = std::max(rep.max_points_beta, r.beta.size());
  }
  const std::size_t n = layout.size();
  const double step_dt = traj.dt();
  const double duration = traj.duration();
  const auto n_samples = static_cast<std::int64_t>(std::floor(duration / dt + 1e-9));
  const double limit_sq = 4.0 * check_cbuff * check_cbuff;
  const double speed_tol = traj.axis_speed * (1.0 + 1e-6) + 1e-9;

  std::vector<AxisCursor> ca;
  std::vector<AxisCursor> cb;
  for (const auto& r : traj.robots) {
    ca.emplace_back(r.alpha);
    cb.emplace_back(r.beta);
  }
  std::vector<AngularPose> prev(n);
  std::vector<Segment2> segs(n);
  double prev_t = 0.0;

  auto axis_issue = [&](int robot, char axis, AxisViolation::Kind kind, double t, double v) {
    ++rep.axis_violation_count;
    if (rep.axis_violations.size() < VerificationReport::kMaxListed) {
      rep.axis_violations.push_back({robot, axis, kind, t, v});
    }
  };

  auto sample = [&](double t, bool first) {
    const double s = t / step_dt;
    for (std::size_t i = 0; i < n; ++i) {
      const AngularPose p{ca[i].at(s), cb[i].at(s)};
      const int idx = static_cast<int>(i);
      // Interpolation round-off can dip a hair below 0 at the lower limit.
      if (p.alpha < -1e-9 || p.alpha >= 360.0) axis_issue(idx, 'a', AxisViolation::Kind::limit, t, p.alpha);
      if (p.beta < -1e-9 || p.beta >= 360.0) axis_issue(idx, 'b', AxisViolation::Kind::limit, t, p.beta);
      if (!first && t > prev_t) {
        const double h = t - prev_t;
        const double va = std::abs(p.alpha - prev[i].alpha) / h;
        const double vb = std::abs(p.beta - prev[i].beta) / h;
        if (va > speed_tol) axis_issue(idx, 'a', AxisViolation::Kind::speed, t, va);
        if (vb > speed_tol) axis_issue(idx, 'b', AxisViolation::Kind::speed, t, vb);
      }
      prev[i] = p;
      segs[i] = beta_arm_segment(layout.robots[i], layout.geom, p);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : layout.neighbors[i]) {
        const auto jj = static_cast<std::size_t>(j);
        if (jj <= i) continue;
        const double d2 = segment_min_distance_sq(segs[i], segs[jj]);
        rep.min_distance_mm = std::min(rep.min_distance_mm, std::sqrt(d2));
        if (d2 <= limit_sq) {
          ++rep.collision_count;
          if (rep.violations.size() < VerificationReport::kMaxListed) {
            rep.violations.push_back({static_cast<int>(i), j, t, std::sqrt(d2)});
          }
        }
      }
    }
    prev_t = t;
    ++rep.samples;
  };

  for (std::int64_t k = 0; k <= n_samples; ++k) sample(static_cast<double>(k) * dt, k == 0);
  if (static_cast<double>(n_samples) * dt < duration - 1e-12) sample(duration, false);
  return rep;
}

// Collision buffer as the sum of arm half-width, smoothing margin and
// lateral positioning uncertainty.
inline double buffer_budget(double arm_halfwidth, double smooth_margin, double lateral_uncertainty) {
  if (arm_halfwidth < 0.0 || smooth_margin < 0.0 || lateral_uncertainty < 0.0) {
    throw ConfigError("buffer budget terms must be non-negative");
  }
  return arm_halfwidth + smooth_margin + lateral_uncertainty;
}

// Fiber offset at full extension caused by axis errors (d_alpha, d_beta).
inline double lateral_uncertainty(const ArmGeometry& geom, double d_alpha, double d_beta) {
  const Point2 f0 = fiber_position({0.0, 0.0}, geom, {0.0, 0.0});
  const Point2 f1 = fiber_position({0.0, 0.0}, geom, {d_alpha, d_beta});
  return norm(f1 - f0);
}

}  // namespace foldplan
