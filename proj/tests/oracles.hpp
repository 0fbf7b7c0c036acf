#pragma once

// Independent reference computations for the tests. None of these call the
// library routine they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "foldplan/geometry.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/trajectory.hpp"

namespace foldplan::test {

namespace detail {

inline Point2 lerp(const Segment2& s, double u) { return s.p0 + u * (s.p1 - s.p0); }

template <typename F>
double golden_min(F f, int iters = 90) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = 1.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int k = 0; k < iters; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::min({fc, fd, f(0.0), f(1.0)});
}

}  // namespace detail

// |P(s) - Q(t)| is jointly convex in (s, t), and so is its partial minimum
// over t, so nested golden-section search on [0,1]^2 finds the global
// minimum. A coarse grid pass guards the result from above.
inline double oracle_segment_distance(const Segment2& s1, const Segment2& s2) {
  double coarse = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 32;
  for (int i = 0; i <= kGrid; ++i) {
    for (int j = 0; j <= kGrid; ++j) {
      coarse = std::min(coarse, norm(detail::lerp(s1, double(i) / kGrid) - detail::lerp(s2, double(j) / kGrid)));
    }
  }
  const double fine = detail::golden_min([&](double s) {
    const Point2 p = detail::lerp(s1, s);
    return detail::golden_min([&](double t) { return norm(p - detail::lerp(s2, t)); });
  });
  return std::min(coarse, fine);
}

// Random segment pairs biased toward the awkward cases: parallel, collinear,
// degenerate, touching, crossing, nearly parallel.
inline std::vector<std::pair<Segment2, Segment2>> special_segment_pairs(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::uniform_real_distribution<double> f(0.0, 1.0);
  std::vector<std::pair<Segment2, Segment2>> out;
  for (int k = 0; k < n; ++k) {
    const Segment2 a{{u(rng), u(rng)}, {u(rng), u(rng)}};
    const Point2 d = a.p1 - a.p0;
    const Point2 perp{-d.y, d.x};
    Segment2 b;
    switch (k % 8) {
      case 0:  // generic
        b = {{u(rng), u(rng)}, {u(rng), u(rng)}};
        break;
      case 1: {  // parallel, offset
        const double off = 0.1 * u(rng);
        const Point2 shift = (off / std::max(norm(perp), 1e-12)) * perp;
        b = {a.p0 + shift + (f(rng) - 0.5) * d, a.p1 + shift + (f(rng) - 0.5) * d};
        break;
      }
      case 2:  // collinear, maybe overlapping
        b = {a.p0 + (2.0 * f(rng) - 0.5) * d, a.p0 + (2.0 * f(rng) - 0.5) * d};
        break;
      case 3:  // one degenerate
        b = {{u(rng), u(rng)}, {}};
        b.p1 = b.p0;
        break;
      case 4:  // both degenerate
        b = {a.p0 + Point2{f(rng), f(rng)}, a.p0 + Point2{f(rng), f(rng)}};
        b.p1 = b.p0;
        break;
      case 5:  // shared endpoint
        b = {a.p1, {u(rng), u(rng)}};
        break;
      case 6: {  // endpoint on interior
        const Point2 m = detail::lerp(a, f(rng));
        b = {m, m + Point2{u(rng), u(rng)}};
        break;
      }
      default: {  // nearly parallel, close
        const Point2 shift = (0.01 * f(rng) / std::max(norm(perp), 1e-12)) * perp;
        b = {a.p0 + shift, a.p1 + shift + Point2{1e-4 * u(rng), 1e-4 * u(rng)}};
        break;
      }
    }
    if (k % 2) out.push_back({a, b});
    else out.push_back({b, a});
  }
  return out;
}

// Largest distance from the base to the buffered beta arm (alpha = 0), by
// sampling points along the arm.
inline double max_buffered_radius(const ArmGeometry& g, double beta_deg, double cbuff, int samples) {
  const double b = beta_deg * std::acos(-1.0) / 180.0;
  const Point2 e{g.alpha_len, 0.0};
  const Point2 dir{std::cos(b), std::sin(b)};
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double s = g.beta_len * k / (samples - 1);
    best = std::max(best, std::hypot(e.x + s * dir.x, e.y + s * dir.y));
  }
  return best + cbuff;
}

// Smallest beta on a 0.01 degree grid from which every larger beta keeps the
// buffered arm within pitch / 2.
inline double oracle_safe_beta(const ArmGeometry& g, double pitch, double cbuff) {
  double threshold = 180.0;
  for (int k = 18000; k >= 0; --k) {
    const double beta = 0.01 * k;
    if (max_buffered_radius(g, beta, cbuff, 1501) > 0.5 * pitch + 1e-12) break;
    threshold = beta;
  }
  return threshold;
}

// Neighbor pairs by brute force over base distances.
inline std::vector<std::pair<int, int>> brute_neighbor_pairs(const GridLayout& layout) {
  std::vector<std::pair<int, int>> out;
  const double thr = 2.0 * (layout.geom.alpha_len + layout.geom.beta_len + layout.cbuff);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.size(); ++j) {
      const double d = std::hypot(layout.robots[i].x - layout.robots[j].x,
                                  layout.robots[i].y - layout.robots[j].y);
      if (d <= thr * (1.0 + 1e-9)) out.push_back({int(i), int(j)});
    }
  }
  return out;
}

inline Segment2 arm(const GridLayout& layout, std::size_t i, double alpha, double beta) {
  const double r = std::acos(-1.0) / 180.0;
  const Point2 b = layout.robots[i];
  const Point2 e{b.x + layout.geom.alpha_len * std::cos(alpha * r), b.y + layout.geom.alpha_len * std::sin(alpha * r)};
  return {e, {e.x + layout.geom.beta_len * std::cos((alpha + beta) * r),
              e.y + layout.geom.beta_len * std::sin((alpha + beta) * r)}};
}

struct SafetyResult {
  double min_distance = std::numeric_limits<double>::infinity();
  double max_axis_delta = 0.0;
  long long collisions = 0;
  long long configurations = 0;
};

// Walks every integer step of a trajectory, checking all neighbor pairs
// (brute-force neighbor list, oracle segment distance only when close) and
// the per-step axis deltas.
inline SafetyResult check_recorded_states(const Trajectory& traj, const GridLayout& layout,
                                          double cbuff) {
  SafetyResult res;
  const auto pairs = brute_neighbor_pairs(layout);
  const std::int64_t last = traj.last_step();
  std::vector<AxisCursor> ca;
  std::vector<AxisCursor> cb;
  for (const auto& r : traj.robots) {
    ca.emplace_back(r.alpha);
    cb.emplace_back(r.beta);
  }
  std::vector<double> pa(layout.size()), pb(layout.size());
  std::vector<Segment2> segs(layout.size());
  for (std::int64_t s = 0; s <= last; ++s) {
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const double a = ca[i].at(double(s));
      const double b = cb[i].at(double(s));
      if (s > 0) res.max_axis_delta = std::max({res.max_axis_delta, std::abs(a - pa[i]), std::abs(b - pb[i])});
      pa[i] = a;
      pb[i] = b;
      segs[i] = arm(layout, i, a, b);
    }
    for (const auto& [i, j] : pairs) {
      const Segment2& s1 = segs[std::size_t(i)];
      const Segment2& s2 = segs[std::size_t(j)];
      // Cheap lower bound from the midpoints before the exact test.
      const Point2 m1 = s1.midpoint();
      const Point2 m2 = s2.midpoint();
      const double lb = norm(m1 - m2) - layout.geom.beta_len;
      if (lb > res.min_distance && lb > 2.0 * cbuff) continue;
      const double d = segment_min_distance(s1, s2);
      res.min_distance = std::min(res.min_distance, d);
      if (d <= 2.0 * cbuff) ++res.collisions;
    }
    ++res.configurations;
  }
  return res;
}

}  // namespace foldplan::test
