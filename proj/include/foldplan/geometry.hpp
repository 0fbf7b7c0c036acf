#pragma once

// Planar kinematics of a two-arm fiber positioner and the beta-arm distance
// primitive. All angles on the public surface are degrees, all lengths mm.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "foldplan/errors.hpp"

namespace foldplan {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Point2, Point2) = default;
};

constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
constexpr double norm_sq(Point2 a) { return dot(a, a); }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

struct Segment2 {
  Point2 p0;
  Point2 p1;

  double length() const { return norm(p1 - p0); }
  Point2 midpoint() const { return 0.5 * (p0 + p1); }
};

struct ArmGeometry {
  double alpha_len = 7.4;
  double beta_len = 15.0;

  double reach() const { return alpha_len + beta_len; }
  double inner_radius() const { return beta_len - alpha_len; }

  // Throws ConfigError unless 0 < alpha_len < beta_len.
  void validate() const {
    if (!(alpha_len > 0.0) || !(beta_len > alpha_len) || !std::isfinite(beta_len)) {
      std::ostringstream msg;
      msg << "arm geometry requires 0 < alpha_len < beta_len, got alpha_len="
          << alpha_len << " beta_len=" << beta_len;
      throw ConfigError(msg.str());
    }
  }
};

struct AngularPose {
  double alpha = 0.0;
  double beta = 0.0;

  friend constexpr bool operator==(AngularPose, AngularPose) = default;
};

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

inline bool within_travel_limits(AngularPose p) {
  return p.alpha >= 0.0 && p.alpha < 360.0 && p.beta >= 0.0 && p.beta < 360.0;
}

inline bool is_right_armed(AngularPose p) {
  return within_travel_limits(p) && p.beta <= 180.0;
}

inline Point2 elbow_position(Point2 base, const ArmGeometry& geom, AngularPose pose) {
  const double a = pose.alpha * kDegToRad;
  return {base.x + geom.alpha_len * std::cos(a), base.y + geom.alpha_len * std::sin(a)};
}

inline Point2 fiber_position(Point2 base, const ArmGeometry& geom, AngularPose pose) {
  const double a = pose.alpha * kDegToRad;
  const double ab = (pose.alpha + pose.beta) * kDegToRad;
  return {base.x + geom.alpha_len * std::cos(a) + geom.beta_len * std::cos(ab),
          base.y + geom.alpha_len * std::sin(a) + geom.beta_len * std::sin(ab)};
}

// Elbow to fiber.
inline Segment2 beta_arm_segment(Point2 base, const ArmGeometry& geom, AngularPose pose) {
  const double a = pose.alpha * kDegToRad;
  const double ab = (pose.alpha + pose.beta) * kDegToRad;
  const Point2 elbow{base.x + geom.alpha_len * std::cos(a),
                     base.y + geom.alpha_len * std::sin(a)};
  return {elbow, {elbow.x + geom.beta_len * std::cos(ab), elbow.y + geom.beta_len * std::sin(ab)}};
}

namespace detail {

inline double point_segment_distance_sq(Point2 p, const Segment2& s) {
  const Point2 d = s.p1 - s.p0;
  const double len_sq = norm_sq(d);
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(dot(p - s.p0, d) / len_sq, 0.0, 1.0);
  return norm_sq(p - (s.p0 + t * d));
}

// Proper or touching crossing, from the line parameters. Near-parallel pairs
// return false: sign tests on round-off there give phantom crossings, and
// the endpoint distances already cover collinear overlap.
inline bool segments_intersect(const Segment2& s1, const Segment2& s2) {
  const Point2 d1 = s1.p1 - s1.p0;
  const Point2 d2 = s2.p1 - s2.p0;
  const double den = cross(d1, d2);
  if (std::abs(den) <= 1e-12 * std::sqrt(norm_sq(d1) * norm_sq(d2))) return false;
  const Point2 w = s2.p0 - s1.p0;
  const double t = cross(w, d2) / den;
  const double u = cross(w, d1) / den;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

}  // namespace detail

// Squared minimum distance between two closed planar segments. In the plane
// the minimum of two disjoint segments is attained at an endpoint of one of
// them, so the exact value is the smallest of four point-segment distances.
inline double segment_min_distance_sq(const Segment2& s1, const Segment2& s2) {
  if (detail::segments_intersect(s1, s2)) return 0.0;
  return std::min({detail::point_segment_distance_sq(s1.p0, s2),
                   detail::point_segment_distance_sq(s1.p1, s2),
                   detail::point_segment_distance_sq(s2.p0, s1),
                   detail::point_segment_distance_sq(s2.p1, s1)});
}

inline double segment_min_distance(const Segment2& s1, const Segment2& s2) {
  return std::sqrt(segment_min_distance_sq(s1, s2));
}

// Right-armed pose (0 <= beta <= 180) placing the fiber on `target`.
inline AngularPose inverse_kinematics_right_arm(Point2 base, const ArmGeometry& geom,
                                                Point2 target) {
  const Point2 d = target - base;
  const double r = norm(d);
  const double la = geom.alpha_len;
  const double lb = geom.beta_len;
  // Tolerate round-off on the rims.
  constexpr double kRimTol = 1e-9;
  if (r < geom.inner_radius() - kRimTol || r > geom.reach() + kRimTol) {
    std::ostringstream msg;
    msg << "target at radius " << r << " mm is outside the patrol annulus ["
        << geom.inner_radius() << ", " << geom.reach() << "]";
    throw ReachError(msg.str());
  }
  const double cos_beta = std::clamp((r * r - la * la - lb * lb) / (2.0 * la * lb), -1.0, 1.0);
  const double beta = std::acos(cos_beta);
  const double alpha = std::atan2(d.y, d.x) - std::atan2(lb * std::sin(beta), la + lb * cos_beta);
  double alpha_deg = std::fmod(alpha * kRadToDeg, 360.0);
  if (alpha_deg < 0.0) alpha_deg += 360.0;
  if (alpha_deg >= 360.0) alpha_deg = 0.0;
  return {alpha_deg, beta * kRadToDeg};
}

// Smallest beta for which the whole collision envelope (beta segment dilated
// by cbuff) stays inside the disk of radius pitch/2 about the base. Robots
// all above this beta cannot touch each other.
//
// The farthest envelope point from the base is max(|elbow|, |fiber|) + cbuff
// and |fiber| decreases monotonically in beta on [0, 180], so the threshold
// solves |fiber|(beta) = pitch/2 - cbuff by the law of cosines.
inline double safe_beta_threshold(const ArmGeometry& geom, double pitch, double cbuff) {
  const double la = geom.alpha_len;
  const double lb = geom.beta_len;
  const double radius = 0.5 * pitch - cbuff;
  if (radius < la || radius < lb - la) {
    std::ostringstream msg;
    msg << "no beta angle folds the buffered arm inside half the pitch (pitch=" << pitch
        << ", cbuff=" << cbuff << ")";
    throw InfeasibleError(msg.str());
  }
  if (radius >= la + lb) return 0.0;
  const double cos_beta = (radius * radius - la * la - lb * lb) / (2.0 * la * lb);
  return std::acos(std::clamp(cos_beta, -1.0, 1.0)) * kRadToDeg;
}

}  // namespace foldplan
