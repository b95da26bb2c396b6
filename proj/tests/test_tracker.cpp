#include "parkvio/tracker.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace parkvio;

namespace {

SlotObservation make_obs_body(const Vec2& center, double heading = 0.0, int gt_id = -1) {
  ParkingSlot s;
  s.center = center;
  s.heading = heading;
  const auto corners = s.corners();
  SlotObservation obs;
  for (int i = 0; i < 4; ++i) {
    obs.corners_body[i] = corners[i];
    obs.corners_px[i] = Vec2::Zero();  // unused by the tracker
  }
  obs.gt_slot_id = gt_id;
  return obs;
}

Quad shifted_box(double x0, double y0, double w, double h) {
  return {Vec2(x0, y0), Vec2(x0 + w, y0), Vec2(x0 + w, y0 + h), Vec2(x0, y0 + h)};
}

}  // namespace

TEST(Associate, SingleExactMatch) {
  const Quad q = shifted_box(0, 0, 2, 5);
  const auto res = associate({q}, {q});
  ASSERT_EQ(res.matches.size(), 1u);
  EXPECT_TRUE(res.unmatched_detections.empty());
  EXPECT_TRUE(res.unmatched_tracks.empty());
}

TEST(Associate, DiagonalDominance) {
  // det0/track0 nearly coincide, det1/track1 nearly coincide, cross pairs far
  const Quad d0 = shifted_box(0, 0, 2, 5);
  const Quad t0 = shifted_box(0.1, 0, 2, 5);
  const Quad d1 = shifted_box(10, 0, 2, 5);
  const Quad t1 = shifted_box(10.1, 0, 2, 5);
  const auto res = associate({d0, d1}, {t0, t1});
  ASSERT_EQ(res.matches.size(), 2u);
  EXPECT_EQ(res.matches[0], std::make_pair(0, 0));
  EXPECT_EQ(res.matches[1], std::make_pair(1, 1));
}

TEST(Associate, GateRejectsWeakOverlap) {
  // overlap 1.6, union 6.4: IoU = 0.25 < 0.3
  const Quad d = shifted_box(0, 0, 2, 2);
  const Quad t = shifted_box(1.2, 0, 2, 2);
  ASSERT_NEAR(iou(d, t), 0.25, 1e-12);
  const auto res = associate({d}, {t}, 0.3);
  EXPECT_TRUE(res.matches.empty());
  EXPECT_EQ(res.unmatched_detections.size(), 1u);
  EXPECT_EQ(res.unmatched_tracks.size(), 1u);
}

TEST(SlotTracker, SpawnsTentativeTracksWithDistinctIds) {
  SlotTracker tracker;
  const auto annotated = tracker.step(
      {make_obs_body(Vec2(3, 5)), make_obs_body(Vec2(3, -5)), make_obs_body(Vec2(8, 5))},
      Pose::identity(), 0.0);
  ASSERT_EQ(tracker.tracks().size(), 3u);
  std::set<int> ids;
  for (const auto& t : tracker.tracks()) {
    EXPECT_EQ(t.status, TrackStatus::kTentative);
    ids.insert(t.id);
  }
  EXPECT_EQ(ids.size(), 3u);
  for (const auto& obs : annotated) EXPECT_GE(obs.track_id, 0);
}

TEST(SlotTracker, NoiselessStaticSlotIsFixedPoint) {
  SlotTracker tracker;
  const auto obs = make_obs_body(Vec2(3, 5), 0.3);
  int id = -1;
  for (int frame = 0; frame < 10; ++frame) {
    const auto annotated = tracker.step({obs}, Pose::identity(), frame * 0.1);
    ASSERT_EQ(annotated.size(), 1u);
    if (frame == 0) id = annotated[0].track_id;
    EXPECT_EQ(annotated[0].track_id, id);
  }
  ASSERT_EQ(tracker.tracks().size(), 1u);
  const auto& track = tracker.tracks()[0];
  EXPECT_EQ(track.status, TrackStatus::kConfirmed);
  EXPECT_LT((track.center_world() - Vec2(3, 5)).norm(), 1e-9);
}

TEST(SlotTracker, SurvivesOcclusionWithinMaxAge) {
  SlotTracker tracker;
  const auto obs = make_obs_body(Vec2(3, 5));
  double t = 0;
  int id = -1;
  for (int frame = 0; frame < 3; ++frame, t += 0.1)
    id = tracker.step({obs}, Pose::identity(), t)[0].track_id;
  for (int gap = 0; gap < 5; ++gap, t += 0.1) tracker.step({}, Pose::identity(), t);
  const auto annotated = tracker.step({obs}, Pose::identity(), t);
  EXPECT_EQ(annotated[0].track_id, id);
  EXPECT_EQ(tracker.tracks().size(), 1u);
}

TEST(SlotTracker, LostAfterMaxAgeAndIdsNeverReused) {
  SlotTracker tracker;
  const auto obs = make_obs_body(Vec2(3, 5));
  double t = 0;
  int first_id = -1;
  for (int frame = 0; frame < 3; ++frame, t += 0.1)
    first_id = tracker.step({obs}, Pose::identity(), t)[0].track_id;
  for (int gap = 0; gap < 6; ++gap, t += 0.1) tracker.step({}, Pose::identity(), t);
  EXPECT_EQ(tracker.tracks()[0].status, TrackStatus::kLost);
  const auto annotated = tracker.step({obs}, Pose::identity(), t);
  EXPECT_NE(annotated[0].track_id, first_id);
  EXPECT_GT(annotated[0].track_id, first_id);
}

TEST(SlotTracker, CovarianceTraceUpdateAndPredict) {
  SlotTracker tracker;
  const auto obs = make_obs_body(Vec2(3, 5));
  tracker.step({obs}, Pose::identity(), 0.0);
  const double trace_after_spawn = tracker.tracks()[0].P.trace();

  // miss: predict only, trace must grow
  tracker.step({}, Pose::identity(), 0.1);
  const double trace_after_predict = tracker.tracks()[0].P.trace();
  EXPECT_GT(trace_after_predict, trace_after_spawn);

  // hit: predict + update, trace must shrink below the predicted value
  tracker.step({obs}, Pose::identity(), 0.2);
  const double trace_after_update = tracker.tracks()[0].P.trace();
  EXPECT_LT(trace_after_update, trace_after_predict);
}

TEST(SlotTracker, NonMonotonicTimeRejected) {
  SlotTracker tracker;
  tracker.step({make_obs_body(Vec2(3, 5))}, Pose::identity(), 1.0);
  EXPECT_THROW(tracker.step({}, Pose::identity(), 0.5), std::invalid_argument);
}

TEST(SlotTracker, OccupancyMajorityVote) {
  SlotTracker tracker;
  auto vacant = make_obs_body(Vec2(3, 5));
  vacant.occupancy = Occupancy::kVacant;
  auto occupied = vacant;
  occupied.occupancy = Occupancy::kOccupied;
  double t = 0;
  tracker.step({vacant}, Pose::identity(), t);
  for (int i = 0; i < 3; ++i) tracker.step({occupied}, Pose::identity(), t += 0.1);
  EXPECT_EQ(tracker.tracks()[0].occupancy, Occupancy::kOccupied);
}

TEST(SlotTracker, UsesVehiclePoseForWorldFrame) {
  SlotTracker tracker;
  const Pose pose = Pose::from_yaw(M_PI / 2, Vec3(10, 0, 0));
  tracker.step({make_obs_body(Vec2(3, 0))}, pose, 0.0);
  // body (3, 0) under yaw 90 deg + t(10,0) lands at world (10, 3)
  EXPECT_LT((tracker.tracks()[0].center_world() - Vec2(10, 3)).norm(), 1e-9);
}

TEST(HardMatch, ThresholdLogic) {
  HardMatchRegistry reg(0.5, 2.0);
  const int id0 = reg.match(Vec2(0, 0));
  EXPECT_EQ(id0, 0);
  // 0.3 m away: joins slot 0
  EXPECT_EQ(reg.match(Vec2(0.3, 0)), id0);
  // running mean is now (0.15, 0); 3 m away from it: new slot
  const int id1 = reg.match(Vec2(3.15, 0));
  EXPECT_NE(id1, id0);
  // 1.0 m from the nearest mean: ambiguous, discarded
  EXPECT_EQ(reg.match(Vec2(1.15, 0)), -1);
  EXPECT_EQ(reg.entries().size(), 2u);
}

TEST(HardMatch, RunningMeanUpdates) {
  HardMatchRegistry reg(0.5, 2.0);
  reg.match(Vec2(0, 0));
  reg.match(Vec2(0.4, 0));
  EXPECT_LT((reg.entries()[0].mean - Vec2(0.2, 0)).norm(), 1e-12);
  EXPECT_EQ(reg.entries()[0].count, 2);
}
