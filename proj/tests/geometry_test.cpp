#include "kinetunnel/error.hpp"
#include "kinetunnel/geometry.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace kinetunnel;
using namespace kinetunnel::testing;

namespace {

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Frame, CanonicalBasisGivesIdentity) {
  const Frame f = frame_from_three_points(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
  EXPECT_TRUE(f.origin.isZero(0.0));
  EXPECT_TRUE(f.axes.isIdentity(1e-15));
  EXPECT_EQ(f.plane_normal(), Vec3(0, 0, 1));
}

TEST(Frame, DegenerateTriplesRejected) {
  expect_code(ErrorCode::CollinearPoints,
              [] { frame_from_three_points(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)); });
  expect_code(ErrorCode::CoincidentPoints,
              [] { frame_from_three_points(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0)); });
  expect_code(ErrorCode::CoincidentPoints,
              [] { frame_from_three_points(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 5e-7)); });
}

TEST(Frame, AxesOrthonormalRightHanded) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Triple t = random_triple(rng);
    const Frame f = frame_from_three_points(t.p1, t.p2, t.p3);
    EXPECT_TRUE((f.axes.transpose() * f.axes).isIdentity(1e-9));
    EXPECT_NEAR(f.axes.determinant(), 1.0, 1e-9);
    EXPECT_EQ(f.plane_normal(), f.axes.col(2));
    EXPECT_TRUE(f.origin.isApprox(t.p1));
    // All three points lie in the local z = 0 plane.
    EXPECT_NEAR(to_local(f, t.p2).z(), 0.0, 1e-9);
    EXPECT_NEAR(to_local(f, t.p3).z(), 0.0, 1e-9);
    EXPECT_TRUE(f.axes.col(0).isApprox((t.p2 - t.p1).normalized(), 1e-12));
  }
}

TEST(Frame, TranslationEquivariant) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const Triple t = random_triple(rng);
    const Vec3 off = random_vec(rng, -10, 10);
    const Frame a = frame_from_three_points(t.p1, t.p2, t.p3);
    const Frame b = frame_from_three_points(t.p1 + off, t.p2 + off, t.p3 + off);
    EXPECT_LT((b.origin - (a.origin + off)).norm(), 1e-9);
    EXPECT_LT((b.axes - a.axes).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Transform, IdentityAndOrigin) {
  const Vec3 p(1, 2, 3);
  EXPECT_EQ(to_local(Frame::identity(), p), p);
  EXPECT_EQ(to_world(Frame::identity(), p), p);
  Frame f;
  f.origin = Vec3(1, 0, 0);
  EXPECT_TRUE(to_local(f, Vec3(1, 0, 0)).isZero(0.0));
}

TEST(Transform, RoundTripBothWays) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Triple t = random_triple(rng);
    const Frame f = frame_from_three_points(t.p1, t.p2, t.p3);
    const Vec3 p = random_vec(rng, -5, 5);
    EXPECT_LT((to_local(f, to_world(f, p)) - p).norm(), 1e-12);
    EXPECT_LT((to_world(f, to_local(f, p)) - p).norm(), 1e-12);
  }
}

TEST(Transform, MatchesExplicitRotationOracle) {
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const Triple t = random_triple(rng);
    const Frame f = frame_from_three_points(t.p1, t.p2, t.p3);
    const Vec3 p = random_vec(rng, -5, 5);
    const Vec3 local = to_local(f, p);
    // Local coordinates are the projections onto each axis.
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(local[k], (p - f.origin).dot(f.axes.col(k)), 1e-12);
  }
}

TEST(ConfidenceIntervalTest, Diameters) {
  EXPECT_EQ(diameter(ConfidenceInterval::C1), 0.10);
  EXPECT_EQ(diameter(ConfidenceInterval::C2), 0.065);
  EXPECT_EQ(diameter(ConfidenceInterval::C3), 0.03);
  EXPECT_EQ(allowed_radius(ConfidenceInterval::C1), 0.05);
  EXPECT_EQ(parse_confidence_interval("c2"), ConfidenceInterval::C2);
  expect_code(ErrorCode::InvalidArgument, [] { parse_confidence_interval("C4"); });
}

TEST(ArcLength, Basics) {
  const std::vector<Vec3> seg{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_EQ(arc_length(seg), 1.0);
  const std::vector<Vec3> square{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0), Vec3(0, 0, 0)};
  EXPECT_EQ(arc_length(square), 4.0);
}

TEST(ArcLength, MatchesCumulativeOracle) {
  Rng rng(15);
  for (int i = 0; i < 50; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 30; ++k) pts.push_back(random_vec(rng, -1, 1));
    double sum = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      const Vec3 d = pts[k] - pts[k - 1];
      sum += std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
    }
    EXPECT_NEAR(arc_length(pts), sum, 1e-12);
  }
}

TEST(Resample, UniformSubdivision) {
  const std::vector<Vec3> seg{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto out = resample_polyline(seg, 0.25);
  ASSERT_EQ(out.size(), 5U);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(out[static_cast<std::size_t>(i)].x(), 0.25 * i, 1e-15);
}

TEST(Resample, SquareLoop) {
  const std::vector<Vec3> square{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0), Vec3(0, 0, 0)};
  const auto out = resample_polyline(square, 0.5);
  ASSERT_EQ(out.size(), 9U);
  // Arc-length oracle: point k sits at distance 0.5 k along the perimeter.
  const std::vector<Vec3> expected{Vec3(0, 0, 0),   Vec3(0.5, 0, 0), Vec3(1, 0, 0), Vec3(1, 0.5, 0), Vec3(1, 1, 0),
                                   Vec3(0.5, 1, 0), Vec3(0, 1, 0),   Vec3(0, 0.5, 0), Vec3(0, 0, 0)};
  for (std::size_t k = 0; k < out.size(); ++k) EXPECT_LT((out[k] - expected[k]).norm(), 1e-12) << k;
  EXPECT_NEAR(arc_length(out), 4.0, 1e-12);
}

TEST(Resample, DegeneratePath) {
  const std::vector<Vec3> same{Vec3(1, 1, 1), Vec3(1, 1, 1)};
  expect_code(ErrorCode::DegeneratePath, [&] { resample_polyline(same, 0.01); });
  const std::vector<Vec3> short_seg{Vec3(0, 0, 0), Vec3(0.004, 0, 0)};
  expect_code(ErrorCode::DegeneratePath, [&] { resample_polyline(short_seg, 0.01); });
}

// Collinear inputs with random interior knots: the path cannot be shortcut,
// so arc length is preserved exactly.
TEST(Resample, PreservesArcLengthOnCollinearInput) {
  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    const Vec3 dir = random_unit(rng);
    const Vec3 a = random_vec(rng, -1, 1);
    std::vector<double> s{0.0};
    for (int k = 0; k < 8; ++k) s.push_back(s.back() + uniform(rng, 0.01, 0.2));
    std::vector<Vec3> pts;
    for (double v : s) pts.push_back(a + v * dir);
    const double spacing = uniform(rng, 0.005, 0.05);
    const auto out = resample_polyline(pts, spacing);
    EXPECT_NEAR(arc_length(out), arc_length(pts), 1e-6);
  }
}

TEST(Resample, EndpointsKeptAndPointsOnPolyline) {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 6; ++k) pts.push_back(random_vec(rng, -1, 1));
    const double spacing = uniform(rng, 0.01, 0.1);
    const auto out = resample_polyline(pts, spacing);
    EXPECT_LT((out.front() - pts.front()).norm(), 1e-12);
    EXPECT_LT((out.back() - pts.back()).norm(), 1e-12);
    EXPECT_LE(arc_length(out), arc_length(pts) + 1e-9);
    for (const Vec3& q : out) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 1; k < pts.size(); ++k) {
        const Vec3 ab = pts[k] - pts[k - 1];
        const double w = std::clamp((q - pts[k - 1]).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        best = std::min(best, (pts[k - 1] + w * ab - q).norm());
      }
      EXPECT_LT(best, 1e-9);
    }
  }
}

TEST(Exercises, CircleClosesAndHasCircumference) {
  const Trajectory t = generate_exercise(Exercise::T4);
  EXPECT_TRUE(t.closed());
  EXPECT_LE((t.via_points.front() - t.via_points.back()).norm(), t.spacing);
  EXPECT_NEAR(arc_length(t.via_points), 2 * std::numbers::pi * 0.15, 0.01 * 2 * std::numbers::pi * 0.15);
  for (const Vec3& p : t.via_points) EXPECT_NEAR(p.z(), 0.0, 1e-12);
}

TEST(Exercises, CircleIsClockwiseSeenFromAbove) {
  const Trajectory t = generate_exercise(Exercise::T4);
  double signed_area = 0.0;
  for (std::size_t i = 1; i < t.via_points.size(); ++i) {
    const Vec3& a = t.via_points[i - 1];
    const Vec3& b = t.via_points[i];
    signed_area += a.x() * b.y() - b.x() * a.y();
  }
  EXPECT_LT(signed_area, 0.0);
}

TEST(Exercises, ReachesHaveStatedShape) {
  const Trajectory t1 = generate_exercise(Exercise::T1);
  const Trajectory t2 = generate_exercise(Exercise::T2);
  const Trajectory t3 = generate_exercise(Exercise::T3);
  EXPECT_NEAR(arc_length(t1.via_points), 0.30, 1e-9);
  for (const Vec3& p : t1.via_points) EXPECT_NEAR(p.z(), 0.0, 1e-12);
  // Left is -x.
  EXPECT_LT(t1.via_points.back().x(), t1.via_points.front().x());
  EXPECT_NEAR(arc_length(t2.via_points), arc_length(t3.via_points), 1e-9);
  const Vec3 h2 = t2.via_points.back() - t2.via_points.front();
  const Vec3 h3 = t3.via_points.back() - t3.via_points.front();
  EXPECT_NEAR(Vec3(h2.x(), h2.y(), 0).dot(Vec3(h3.x(), h3.y(), 0)), 0.0, 1e-12);
  EXPECT_GT(h3.y(), 0.0);
  EXPECT_GT(t2.via_points.back().z(), t1.via_points.back().z());
}

TEST(Exercises, SpacingWithinTenPercent) {
  for (Exercise e : {Exercise::T1, Exercise::T2, Exercise::T3, Exercise::T4}) {
    const Trajectory t = generate_exercise(e);
    ASSERT_GE(t.via_points.size(), 2U);
    for (std::size_t i = 1; i < t.via_points.size(); ++i) {
      const double step = (t.via_points[i] - t.via_points[i - 1]).norm();
      EXPECT_NEAR(step, t.spacing, 0.1 * t.spacing) << to_string(e) << " step " << i;
    }
    EXPECT_TRUE(t.via_points.front().isApprox(t.start_point()));
  }
}

TEST(Exercises, StartPointIsHonoured) {
  ExerciseParams p;
  p.start_point = Vec3(0.1, -0.05, 0.0);
  const Vec3 table = p.start_point + Vec3(0, 0, p.table_height);
  const Vec3 shoulder = p.start_point + Vec3(0, 0, p.shoulder_height);
  EXPECT_LT((generate_exercise(Exercise::T1, p).start_point() - table).norm(), 1e-12);
  EXPECT_LT((generate_exercise(Exercise::T2, p).start_point() - shoulder).norm(), 1e-12);
  EXPECT_LT((generate_exercise(Exercise::T3, p).start_point() - shoulder).norm(), 1e-12);
  EXPECT_LT((generate_exercise(Exercise::T4, p).start_point() - table).norm(), 1e-12);
}

TEST(Placement, VerticalComponentDropped) {
  const Trajectory t = generate_exercise(Exercise::T1);
  const Trajectory moved = translated_in_plane(t, Vec3(0.1, 0.2, 0.3));
  for (std::size_t i = 0; i < t.via_points.size(); ++i) {
    EXPECT_TRUE((moved.via_points[i] - t.via_points[i]).isApprox(Vec3(0.1, 0.2, 0.0)));
  }
}
