#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "foldplan/geometry.hpp"
#include "oracles.hpp"

using namespace foldplan;

namespace {
const ArmGeometry kSdss{};
}

TEST(Geometry, FiberPositionSpotValues) {
  auto f = fiber_position({0, 0}, kSdss, {0, 0});
  EXPECT_NEAR(f.x, 22.4, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
  f = fiber_position({0, 0}, kSdss, {0, 180});
  EXPECT_NEAR(f.x, -7.6, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
  f = fiber_position({0, 0}, kSdss, {1.50, 1.48});
  EXPECT_NEAR(f.x, 22.38, 0.005);
  EXPECT_NEAR(f.y, 0.97, 0.005);
}

TEST(Geometry, ElbowPosition) {
  auto e = elbow_position({0, 0}, kSdss, {0, 77});
  EXPECT_NEAR(e.x, 7.4, 1e-12);
  EXPECT_NEAR(e.y, 0.0, 1e-12);
  e = elbow_position({0, 0}, kSdss, {90, 0});
  EXPECT_NEAR(e.x, 0.0, 1e-12);
  EXPECT_NEAR(e.y, 7.4, 1e-12);
  e = elbow_position({10, -5}, kSdss, {180, 90});
  EXPECT_NEAR(e.x, 2.6, 1e-12);
  EXPECT_NEAR(e.y, -5.0, 1e-12);
}

TEST(Geometry, BetaSegmentEndsAndLength) {
  auto s = beta_arm_segment({0, 0}, kSdss, {0, 0});
  EXPECT_NEAR(s.p0.x, 7.4, 1e-12);
  EXPECT_NEAR(s.p1.x, 22.4, 1e-12);
  s = beta_arm_segment({0, 0}, kSdss, {0, 180});
  EXPECT_NEAR(s.p1.x, -7.6, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 360.0);
  for (int k = 0; k < 1000; ++k) {
    const auto seg = beta_arm_segment({ang(rng) / 10, -ang(rng) / 10}, kSdss, {ang(rng), ang(rng)});
    EXPECT_NEAR(seg.length(), 15.0, 1e-9);
  }
}

TEST(Geometry, FiberTranslationAndPeriodicity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(0.0, 360.0);
  std::uniform_real_distribution<double> off(-100.0, 100.0);
  for (int k = 0; k < 500; ++k) {
    const AngularPose p{ang(rng), ang(rng)};
    const Point2 b{off(rng), off(rng)};
    const Point2 f0 = fiber_position({0, 0}, kSdss, p);
    const Point2 fb = fiber_position(b, kSdss, p);
    EXPECT_NEAR(fb.x - b.x, f0.x, 1e-9);
    EXPECT_NEAR(fb.y - b.y, f0.y, 1e-9);
    const Point2 fw = fiber_position({0, 0}, kSdss, {p.alpha + 360.0, p.beta - 360.0});
    EXPECT_NEAR(fw.x, f0.x, 1e-9);
    EXPECT_NEAR(fw.y, f0.y, 1e-9);
    const double r = norm(f0);
    EXPECT_GE(r, 7.6 - 1e-9);
    EXPECT_LE(r, 22.4 + 1e-9);
  }
}

TEST(Geometry, SegmentDistanceBasics) {
  const Segment2 a{{0, 0}, {1, 0}};
  EXPECT_EQ(segment_min_distance(a, a), 0.0);
  EXPECT_NEAR(segment_min_distance(a, {{0, 1}, {1, 1}}), 1.0, 1e-15);
  // Crossing.
  EXPECT_EQ(segment_min_distance({{-1, -1}, {1, 1}}, {{-1, 1}, {1, -1}}), 0.0);
  // Collinear, disjoint.
  EXPECT_NEAR(segment_min_distance(a, {{3, 0}, {5, 0}}), 2.0, 1e-15);
  // Collinear, overlapping.
  EXPECT_EQ(segment_min_distance(a, {{0.5, 0}, {5, 0}}), 0.0);
  // Degenerate points.
  EXPECT_NEAR(segment_min_distance({{0, 0}, {0, 0}}, {{3, 4}, {3, 4}}), 5.0, 1e-15);
  EXPECT_NEAR(segment_min_distance({{0.5, 2}, {0.5, 2}}, a), 2.0, 1e-15);
  // T configuration: endpoint touching interior.
  EXPECT_EQ(segment_min_distance(a, {{0.5, 0}, {0.5, 3}}), 0.0);
  // Skew, closest points at interior of one segment and endpoint of other.
  EXPECT_NEAR(segment_min_distance(a, {{0.5, 1}, {2, 4}}), 1.0, 1e-15);
}

TEST(Geometry, SegmentDistanceSymmetricAndNeverAboveSampledPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_real_distribution<double> f(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Segment2 s1{{u(rng), u(rng)}, {u(rng), u(rng)}};
    const Segment2 s2{{u(rng), u(rng)}, {u(rng), u(rng)}};
    const double d = segment_min_distance(s1, s2);
    EXPECT_EQ(d, segment_min_distance(s2, s1));
    EXPECT_GE(d, 0.0);
    for (int q = 0; q < 20; ++q) {
      const double a = f(rng);
      const double b = f(rng);
      const Point2 p = s1.p0 + a * (s1.p1 - s1.p0);
      const Point2 r = s2.p0 + b * (s2.p1 - s2.p0);
      EXPECT_LE(d, norm(p - r) + 1e-12);
    }
    EXPECT_EQ(d == 0.0, detail::segments_intersect(s1, s2));
  }
}

TEST(Geometry, SegmentDistanceMatchesOracleOnSpecialCases) {
  std::mt19937_64 rng(5);
  for (const auto& [s1, s2] : test::special_segment_pairs(rng, 500)) {
    EXPECT_NEAR(segment_min_distance(s1, s2), test::oracle_segment_distance(s1, s2), 1e-6);
  }
}

TEST(Geometry, InverseKinematicsRims) {
  // acos is ill-conditioned at the outer rim, so beta is only good to ~1e-6.
  auto p = inverse_kinematics_right_arm({0, 0}, kSdss, {22.4, 0});
  EXPECT_NEAR(std::remainder(p.alpha, 360.0), 0.0, 1e-4);
  EXPECT_NEAR(p.beta, 0.0, 1e-4);
  p = inverse_kinematics_right_arm({0, 0}, kSdss, {-7.6, 0});
  EXPECT_NEAR(p.alpha, 0.0, 1e-6);
  EXPECT_NEAR(p.beta, 180.0, 1e-6);
  EXPECT_THROW(inverse_kinematics_right_arm({0, 0}, kSdss, {23, 0}), ReachError);
  EXPECT_THROW(inverse_kinematics_right_arm({0, 0}, kSdss, {1, 1}), ReachError);
}

TEST(Geometry, InverseKinematicsRoundTrip) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a(0.0, 360.0);
  std::uniform_real_distribution<double> b(0.5, 179.5);
  for (int k = 0; k < 1000; ++k) {
    const AngularPose p{a(rng), b(rng)};
    const Point2 base{3.0, -2.0};
    const AngularPose q = inverse_kinematics_right_arm(base, kSdss, fiber_position(base, kSdss, p));
    EXPECT_TRUE(is_right_armed(q));
    EXPECT_NEAR(q.beta, p.beta, 1e-6);
    const double da = std::remainder(q.alpha - p.alpha, 360.0);
    EXPECT_NEAR(da, 0.0, 1e-6);
    const Point2 f = fiber_position(base, kSdss, q);
    const Point2 g = fiber_position(base, kSdss, p);
    EXPECT_NEAR(norm(f - g), 0.0, 1e-9);
  }
}

TEST(Geometry, SafeBetaMatchesSamplingOracle) {
  for (double cb : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5}) {
    const double got = safe_beta_threshold(kSdss, 22.4, cb);
    const double want = test::oracle_safe_beta(kSdss, 22.4, cb);
    EXPECT_NEAR(got, want, 0.05) << "cbuff " << cb;
  }
}

TEST(Geometry, SafeBetaEnvelopeTouchesHalfPitch) {
  for (double cb : {1.5, 2.5}) {
    const double beta = safe_beta_threshold(kSdss, 22.4, cb);
    const double reach = test::max_buffered_radius(kSdss, beta, cb, 20001);
    EXPECT_NEAR(reach, 11.2, 1e-3);
  }
}

TEST(Geometry, SafeBetaEdgeCases) {
  // Arm always inside the half-pitch disk.
  EXPECT_EQ(safe_beta_threshold({2.0, 3.0}, 22.4, 0.0), 0.0);
  // Elbow circle alone breaks the disk.
  EXPECT_THROW(safe_beta_threshold(kSdss, 22.4, 4.0), InfeasibleError);
}

TEST(Geometry, ArmValidation) {
  EXPECT_THROW((ArmGeometry{0.0, 15.0}.validate()), ConfigError);
  EXPECT_THROW((ArmGeometry{15.0, 7.4}.validate()), ConfigError);
  EXPECT_NO_THROW(kSdss.validate());
}
