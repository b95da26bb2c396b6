#include "parkvio/trajectory.hpp"

#include <gtest/gtest.h>

using namespace parkvio;

namespace {

const TrajectoryKind kAllKinds[] = {
    TrajectoryKind::kStraight0,    TrajectoryKind::kLeft45,        TrajectoryKind::kRight45,
    TrajectoryKind::kLeft90,       TrajectoryKind::kRight90,       TrajectoryKind::kLeftParallel,
    TrajectoryKind::kRightParallel, TrajectoryKind::kRound};

double polyline_length(const std::vector<TrajectorySample>& samples) {
  double len = 0;
  for (size_t i = 1; i < samples.size(); ++i)
    len += (samples[i].pose.t - samples[i - 1].pose.t).norm();
  return len;
}

}  // namespace

TEST(Trajectory, Straight0LengthMatchesPaper) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kStraight0;
  p.length = 4.94;
  const auto traj = generate_trajectory(p);
  EXPECT_NEAR(polyline_length(traj.sampled()), 4.94, 0.05);
}

TEST(Trajectory, RoundLengthMatchesPaper) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kRound;
  p.length = 121.62;
  const auto traj = generate_trajectory(p);
  EXPECT_NEAR(polyline_length(traj.sampled()), 121.62, 1.2);
  EXPECT_NEAR(traj.speed(), 2.78, 1e-12);
}

TEST(Trajectory, AllKindsHitRequestedLengthWithinOnePercent) {
  for (auto kind : kAllKinds) {
    TrajectoryParams p;
    p.kind = kind;
    const auto traj = generate_trajectory(p);
    const double want = default_length(kind);
    EXPECT_NEAR(polyline_length(traj.sampled()), want, 0.01 * want) << to_string(kind);
  }
}

TEST(Trajectory, DegenerateInputsRejected) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kLeft45;
  p.length = -1.0;
  EXPECT_THROW(generate_trajectory(p), std::invalid_argument);
  p.length = 1.0;
  p.speed = -2.0;
  EXPECT_THROW(generate_trajectory(p), std::invalid_argument);
  EXPECT_THROW(trajectory_kind_from_string("zigzag"), std::invalid_argument);
}

TEST(Trajectory, TimestampsStrictlyIncreasing) {
  for (auto kind : kAllKinds) {
    const auto traj = generate_trajectory(TrajectoryParams{.kind = kind});
    const auto samples = traj.sampled();
    for (size_t i = 1; i < samples.size(); ++i)
      ASSERT_GT(samples[i].t, samples[i - 1].t);
  }
}

// velocity and acceleration must be consistent with pose differences
TEST(Trajectory, DerivativesMatchFiniteDifferences) {
  for (auto kind : kAllKinds) {
    const auto traj = generate_trajectory(TrajectoryParams{.kind = kind});
    const double h = 1e-5;
    for (double t = 0.2; t < traj.duration() - 0.2; t += traj.duration() / 7.0) {
      const auto sm = traj.at(t - h);
      const auto s0 = traj.at(t);
      const auto sp = traj.at(t + h);
      const Vec3 v_fd = (sp.pose.t - sm.pose.t) / (2 * h);
      const Vec3 a_fd = (sp.velocity - sm.velocity) / (2 * h);
      EXPECT_LT((v_fd - s0.velocity).norm(), 1e-5) << to_string(kind) << " t=" << t;
      EXPECT_LT((a_fd - s0.acceleration).norm(), 1e-4) << to_string(kind) << " t=" << t;
      const double yaw_fd = wrap_angle(yaw_of(sp.pose.q) - yaw_of(sm.pose.q)) / (2 * h);
      EXPECT_NEAR(yaw_fd, s0.angular_velocity.z(), 1e-5) << to_string(kind) << " t=" << t;
    }
  }
}

TEST(Trajectory, TurnFamiliesReachExpectedHeading) {
  const auto traj45 = generate_trajectory(TrajectoryParams{.kind = TrajectoryKind::kLeft45});
  EXPECT_NEAR(yaw_of(traj45.at(traj45.duration()).pose.q), M_PI / 4, 1e-6);
  const auto traj90 = generate_trajectory(TrajectoryParams{.kind = TrajectoryKind::kRight90});
  EXPECT_NEAR(yaw_of(traj90.at(traj90.duration()).pose.q), -M_PI / 2, 1e-6);
  // parallel maneuver ends parallel to the start heading, laterally offset
  const auto par = generate_trajectory(TrajectoryParams{.kind = TrajectoryKind::kLeftParallel});
  EXPECT_NEAR(yaw_of(par.at(par.duration()).pose.q), 0.0, 1e-6);
  EXPECT_GT(par.at(par.duration()).pose.t.y(), 0.5);
  // round closes the heading loop
  const auto round = generate_trajectory(TrajectoryParams{.kind = TrajectoryKind::kRound});
  EXPECT_NEAR(wrap_angle(yaw_of(round.at(round.duration()).pose.q)), 0.0, 1e-6);
}
