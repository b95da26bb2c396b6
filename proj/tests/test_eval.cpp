#include "parkvio/eval.hpp"
#include "parkvio/pipeline.hpp"

#include <gtest/gtest.h>

using namespace parkvio;

namespace {

io::StoredTrajectory line_truth(double duration, const Vec3& velocity) {
  io::StoredTrajectory t;
  for (double s = 0; s <= duration + 1e-9; s += 0.05) {
    TrajectorySample sample;
    sample.t = s;
    sample.pose = Pose(Quat::Identity(), velocity * s);
    sample.velocity = velocity;
    t.samples.push_back(sample);
  }
  t.duration = duration;
  t.arc_length = velocity.norm() * duration;
  return t;
}

}  // namespace

TEST(Rmse, ExactEstimateGivesZero) {
  const auto truth = line_truth(2.0, Vec3(1, 0, 0));
  std::vector<TimedPose> est;
  for (const auto& s : truth.samples) est.push_back({s.t, s.pose});
  EXPECT_EQ(rmse(est, truth).rmse, 0.0);
}

TEST(Rmse, ConstantOffset) {
  const auto truth = line_truth(2.0, Vec3(1, 0, 0));
  std::vector<TimedPose> est;
  for (const auto& s : truth.samples)
    est.push_back({s.t, Pose(s.pose.q, s.pose.t + Vec3(0.1, 0, 0))});
  EXPECT_NEAR(rmse(est, truth).rmse, 0.1, 1e-12);
}

// errors (0.3, 0.4) on two samples, zero on two more:
// sqrt((0.09 + 0.16) / 4) = 0.25
TEST(Rmse, HandArithmetic) {
  const auto truth = line_truth(0.15, Vec3(0, 0, 0));
  std::vector<TimedPose> est = {
      {0.00, Pose(Quat::Identity(), Vec3(0.3, 0, 0))},
      {0.05, Pose(Quat::Identity(), Vec3(0, 0.4, 0))},
      {0.10, Pose(Quat::Identity(), Vec3(0, 0, 0))},
      {0.15, Pose(Quat::Identity(), Vec3(0, 0, 0))},
  };
  EXPECT_NEAR(rmse(est, truth).rmse, 0.25, 1e-12);
}

TEST(Rmse, EmptyOverlapRejected) {
  const auto truth = line_truth(1.0, Vec3(1, 0, 0));
  std::vector<TimedPose> est = {{5.0, Pose()}};
  EXPECT_THROW(rmse(est, truth), DataError);
}

TEST(Rmse, InterpolatesTruth) {
  const auto truth = line_truth(2.0, Vec3(2, 0, 0));
  // estimate exactly between truth samples
  std::vector<TimedPose> est = {{0.075, Pose(Quat::Identity(), Vec3(0.15, 0, 0))}};
  EXPECT_NEAR(rmse(est, truth).rmse, 0.0, 1e-12);
}

TEST(IdSwitches, CountsConsecutiveChangesOnly) {
  std::vector<AssociationRow> rows = {
      {0.0, 7, 1}, {0.1, 7, 1}, {0.2, 7, 2},  // switch (consecutive)
      {0.3, 7, 2},
      {2.0, 7, 3},  // gap: re-identification, not a switch
      {2.1, 7, 3},
  };
  EXPECT_EQ(count_id_switches(rows), 1);
}

TEST(Io, WorldRoundTrip) {
  const auto world = generate_world(WorldSpec{}, 11);
  const auto restored = io::world_from_json(io::world_to_json(world));
  ASSERT_EQ(restored.slots.size(), world.slots.size());
  ASSERT_EQ(restored.landmarks.size(), world.landmarks.size());
  for (size_t i = 0; i < world.slots.size(); ++i) {
    EXPECT_EQ((restored.slots[i].center - world.slots[i].center).norm(), 0.0);
    EXPECT_EQ(restored.slots[i].occupancy, world.slots[i].occupancy);
  }
}

TEST(Io, SensorLogRoundTrip) {
  const auto world = generate_world(WorldSpec{}, 12);
  const auto traj = generate_trajectory(TrajectoryParams{.kind = TrajectoryKind::kLeft45});
  const auto log = simulate_sensors(world, traj, NoiseModel::standard(), 3);
  const auto restored = io::sensor_log_from_jsonl(io::sensor_log_to_jsonl(log));
  ASSERT_EQ(restored.imu.size(), log.imu.size());
  ASSERT_EQ(restored.frames.size(), log.frames.size());
  ASSERT_EQ(restored.bev.size(), log.bev.size());
  double max_diff = 0;
  for (size_t i = 0; i < log.imu.size(); ++i)
    max_diff = std::max(max_diff, (restored.imu[i].accel - log.imu[i].accel).norm());
  for (size_t i = 0; i < log.bev.size(); ++i) {
    ASSERT_EQ(restored.bev[i].detections.size(), log.bev[i].detections.size());
    for (size_t d = 0; d < log.bev[i].detections.size(); ++d)
      max_diff = std::max(max_diff, (restored.bev[i].detections[d].corners_body[2] -
                                     log.bev[i].detections[d].corners_body[2])
                                        .norm());
  }
  EXPECT_EQ(max_diff, 0.0);  // shortest round-trip float serialization is exact
}

TEST(Io, SchemaMismatchRejected) {
  EXPECT_THROW(io::world_from_json(json{{"schema", "something_else"}, {"version", 1}}), DataError);
  EXPECT_THROW(io::sensor_log_from_jsonl("{\"schema\":\"parkvio_sensor_log\",\"version\":99}\n"),
               DataError);
}

TEST(Io, DatasetRoundTripWithChecksums) {
  DatasetSpec spec;
  spec.kind = TrajectoryKind::kStraight0;
  spec.seed = 4;
  spec.noise = NoiseModel::zero();
  const auto ds = simulate_dataset(spec);
  const fs::path dir = fs::temp_directory_path() / "parkvio_test_dataset";
  fs::remove_all(dir);
  save_dataset(ds, dir);
  const auto restored = load_dataset(dir);
  EXPECT_EQ(restored.kind, ds.kind);
  EXPECT_EQ(restored.log.imu.size(), ds.log.imu.size());
  EXPECT_EQ(restored.trajectory.samples.size(), ds.trajectory.samples.size());

  // corrupt one byte: checksum must catch it
  auto content = io::read_file(dir / "sensors.jsonl");
  content[content.size() / 2] ^= 0x1;
  io::write_file(dir / "sensors.jsonl", content);
  EXPECT_THROW(load_dataset(dir), DataError);
  fs::remove_all(dir);
}

TEST(Io, OdometryRoundTrip) {
  std::vector<TimedPose> poses = {{0.0, Pose(Quat::Identity(), Vec3(1, 2, 3))},
                                  {0.5, Pose::from_yaw(0.7, Vec3(4, 5, 6))}};
  const auto restored = io::odometry_from_jsonl(io::odometry_to_jsonl(poses));
  ASSERT_EQ(restored.size(), 2u);
  EXPECT_EQ((restored[1].pose.t - poses[1].pose.t).norm(), 0.0);
  EXPECT_EQ(log_so3(restored[1].pose.q.conjugate() * poses[1].pose.q).norm(), 0.0);
}

TEST(Comparison, FailedCellRendering) {
  EvalReport ok;
  ok.method = "full";
  ok.trajectory_kind = "round";
  ok.rmse = 1.0;
  EvalReport ok2 = ok;
  ok2.rmse = 2.0;
  EvalReport failed;
  failed.method = "hard_match_association";
  failed.trajectory_kind = "round";
  failed.failed = true;

  const auto table = ComparisonTable::build({ok, ok2, failed});
  EXPECT_EQ(table.cell_text("round", "full"), "1.500");  // mean over seeds
  EXPECT_EQ(table.cell_text("round", "hard_match_association"), "fail");
  EXPECT_EQ(table.cell_text("round", "missing"), "-");
}

TEST(Comparison, SingleReportTable) {
  EvalReport r;
  r.method = "ekf";
  r.trajectory_kind = "straight0";
  r.rmse = 0.25;
  const auto table = ComparisonTable::build({r});
  ASSERT_EQ(table.methods.size(), 1u);
  ASSERT_EQ(table.trajectories.size(), 1u);
  EXPECT_EQ(table.cell_text("straight0", "ekf"), "0.250");
}
