#include "parkvio/geom.hpp"
#include "parkvio/rng.hpp"

#include <gtest/gtest.h>

using namespace parkvio;

namespace {

Pose random_pose(Rng& rng) {
  const Vec3 axis_angle(rng.normal(0, 1.0), rng.normal(0, 1.0), rng.normal(0, 1.0));
  return Pose(exp_so3(axis_angle), Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)));
}

double rotation_angle_between(const Quat& a, const Quat& b) {
  return log_so3(a.conjugate() * b).norm();
}

}  // namespace

TEST(Pose, ComposeIdentity) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const Pose T = random_pose(rng);
    const Pose out = compose(Pose::identity(), T);
    EXPECT_LT(rotation_angle_between(out.q, T.q), 1e-12);
    EXPECT_LT((out.t - T.t).norm(), 1e-12);
  }
}

TEST(Pose, ComposeInverseIsIdentity) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Pose T = random_pose(rng);
    const Pose out = compose(T, T.inverse());
    EXPECT_LT(rotation_angle_between(out.q, Quat::Identity()), 1e-9);
    EXPECT_LT(out.t.norm(), 1e-9);
    EXPECT_NEAR(out.q.norm(), 1.0, 1e-9);
  }
}

// Hand-expanded Hamilton product: qz(90) = (c, 0, 0, s) with c = s = sqrt(2)/2;
// (c,0,0,s) * (c,0,0,s) = (c^2 - s^2, 0, 0, 2cs) = (0, 0, 0, 1) = qz(180).
TEST(Pose, ComposeRotZ90Twice) {
  const Pose r90 = Pose::from_yaw(M_PI / 2.0);
  const Pose out = compose(r90, r90);
  EXPECT_NEAR(out.q.w(), 0.0, 1e-12);
  EXPECT_NEAR(out.q.x(), 0.0, 1e-12);
  EXPECT_NEAR(out.q.y(), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(out.q.z()), 1.0, 1e-12);
}

TEST(Pose, ComposeAssociative) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose c = random_pose(rng);
    const Pose lhs = compose(compose(a, b), c);
    const Pose rhs = compose(a, compose(b, c));
    EXPECT_LT(rotation_angle_between(lhs.q, rhs.q), 1e-9);
    EXPECT_LT((lhs.t - rhs.t).norm(), 1e-9);
  }
}

TEST(BodyToWorld, Examples) {
  // identity
  EXPECT_LT((body_to_world(Vec3(1, 2, 0), Pose::identity()) - Vec3(1, 2, 0)).norm(), 1e-15);
  // pure translation
  const Pose trans(Quat::Identity(), Vec3(3, 0, 0));
  EXPECT_LT((body_to_world(Vec3(1, 0, 0), trans) - Vec3(4, 0, 0)).norm(), 1e-15);
  // rotZ(90) + translation(1,1,0): R*(1,0,0) = (0,1,0), +t = (1,2,0)
  const Pose T = Pose::from_yaw(M_PI / 2.0, Vec3(1, 1, 0));
  EXPECT_LT((body_to_world(Vec3(1, 0, 0), T) - Vec3(1, 2, 0)).norm(), 1e-12);
}

TEST(BodyToWorld, PreservesDistances) {
  Rng rng(10);
  for (int i = 0; i < 200; ++i) {
    const Pose T = random_pose(rng);
    const Vec3 a(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec3 b(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    EXPECT_NEAR((body_to_world(a, T) - body_to_world(b, T)).norm(), (a - b).norm(), 1e-9);
  }
}

TEST(BevCalibration, CenterPixelMapsToOrigin) {
  BevCalibration calib;
  ASSERT_EQ(calib.image_size, 576);
  ASSERT_NEAR(calib.coverage_m, 11.32, 1e-12);
  const Vec2 body = calib.bev_to_body(Vec2(288, 288));
  EXPECT_LT(body.norm(), 1e-12);
}

// Pixel (576, 288) sits half an image width to the right of center:
// 288 px * 11.32 m / 576 px = 5.66 m, to the right = -y in body frame.
TEST(BevCalibration, RightEdgePixel) {
  BevCalibration calib;
  const Vec2 body = calib.bev_to_body(Vec2(576, 288));
  EXPECT_NEAR(body.x(), 0.0, 1e-12);
  EXPECT_NEAR(body.y(), -5.66, 1e-12);
}

TEST(BevCalibration, MetersPerPixelPositive) {
  BevCalibration calib;
  EXPECT_GT(calib.meters_per_pixel(), 0.0);
  EXPECT_NEAR(calib.meters_per_pixel(), 11.32 / 576.0, 1e-15);
}

TEST(BevCalibration, OutOfBoundsRejected) {
  BevCalibration calib;
  EXPECT_THROW(calib.bev_to_body(Vec2(-1, 10)), std::out_of_range);
  EXPECT_THROW(calib.bev_to_body(Vec2(10, 600)), std::out_of_range);
}

TEST(BevCalibration, RoundTripOnSubgrid) {
  BevCalibration calib;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      const Vec2 px(i * 576.0 / 15.0, j * 576.0 / 15.0);
      const Vec2 back = calib.body_to_bev(calib.bev_to_body(px));
      EXPECT_LT((back - px).norm(), 1e-9);
    }
  }
}

TEST(FrontCamera, VisibilityAndProjection) {
  FrontCamera cam;
  // ground point 3 m ahead of the body origin
  EXPECT_TRUE(cam.visible(Vec3(3.0, 0.0, 0.0)));
  // behind the vehicle
  EXPECT_FALSE(cam.visible(Vec3(-3.0, 0.0, 0.0)));
  // beyond range
  EXPECT_FALSE(cam.visible(Vec3(40.0, 0.0, 0.0)));
  const Vec2 uv = cam.project(Vec3(3.0, 0.0, 0.0));
  EXPECT_NEAR(uv.x(), 0.0, 1e-12);
  EXPECT_NEAR(uv.y(), 1.2, 1e-12);  // camera 1.2 m above ground, 1 m ahead of mount
}

TEST(SO3, ExpLogRoundTrip) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec3 theta(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    if (theta.norm() >= M_PI) theta *= 0.99 * M_PI / theta.norm();
    const Vec3 back = log_so3(exp_so3(theta));
    EXPECT_LT((back - theta).norm(), 1e-9);
  }
}
