#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/hungarian.hpp"
#include "parkvio/iou.hpp"
#include "parkvio/slots.hpp"

#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace parkvio {

enum class TrackStatus { kTentative, kConfirmed, kLost };

struct TrackerConfig {
  double iou_gate = 0.3;    // assignments below this overlap are rejected
  int min_hits = 2;         // confirmations required
  int max_age = 5;          // missed BEV frames before a track is lost (0.5 s at 10 Hz)
  int occupancy_votes = 5;  // majority window

  // Kalman tuning. State: (cx, cy, heading, width, depth, vx, vy) with a
  // constant-velocity center and static extent/heading.
  double init_pos_std = 0.4;
  double init_heading_std = 0.1;
  double init_extent_std = 0.2;
  double init_vel_std = 0.3;
  double process_pos_std = 0.01;      // per sqrt(s)
  double process_heading_std = 0.005;
  double process_extent_std = 0.002;
  double process_vel_std = 0.08;
  double meas_pos_std = 0.08;
  double meas_heading_std = 0.05;
  double meas_extent_std = 0.10;
  // detections far from the BEV center are stretched and noisier; their
  // measurement noise grows with the normalized center distance
  double meas_distance_gain = 1.5;
};

// Rectangle measurement derived from the 4 canonical corners
// [front-left, front-right, back-right, back-left].
struct SlotMeasurement {
  Vec2 center;
  double heading;
  double width;
  double depth;

  static SlotMeasurement from_corners(const Quad& c) {
    SlotMeasurement m;
    m.center = 0.25 * (c[0] + c[1] + c[2] + c[3]);
    const Vec2 front_mid = 0.5 * (c[0] + c[1]);
    const Vec2 back_mid = 0.5 * (c[2] + c[3]);
    const Vec2 open_dir = front_mid - back_mid;
    m.heading = std::atan2(open_dir.y(), open_dir.x());
    m.width = 0.5 * ((c[0] - c[1]).norm() + (c[3] - c[2]).norm());
    m.depth = 0.5 * ((c[0] - c[3]).norm() + (c[1] - c[2]).norm());
    return m;
  }
};

struct TrackedSlot {
  int id = -1;
  TrackStatus status = TrackStatus::kTentative;
  int hits = 0;
  int misses = 0;
  double last_update_t = 0;
  int gt_slot_id = -1;  // evaluation bookkeeping, carried from observations

  Eigen::Matrix<double, 7, 1> x;  // cx, cy, heading, width, depth, vx, vy
  Eigen::Matrix<double, 7, 7> P;

  Occupancy occupancy = Occupancy::kVacant;
  std::deque<Occupancy> votes;

  Vec2 center_world() const { return Vec2(x[0], x[1]); }

  Quad corners_world() const {
    ParkingSlot s;
    s.center = center_world();
    s.heading = x[2];
    s.width = x[3];
    s.depth = x[4];
    const auto arr = s.corners();
    return {arr[0], arr[1], arr[2], arr[3]};
  }
};

struct AssociationResult {
  std::vector<std::pair<int, int>> matches;  // (detection index, track index)
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_tracks;
};

// IoU-gated optimal assignment between detection quads and predicted track
// quads, both in the world frame.
inline AssociationResult associate(const std::vector<Quad>& detections,
                                   const std::vector<Quad>& predicted_tracks,
                                   double iou_gate = 0.3) {
  AssociationResult out;
  const int n = static_cast<int>(detections.size());
  const int m = static_cast<int>(predicted_tracks.size());
  std::vector<char> det_used(n, false), trk_used(m, false);
  if (n > 0 && m > 0) {
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = 1.0 - iou(detections[i], predicted_tracks[j]);
    for (const auto& [i, j] : hungarian(cost)) {
      if (1.0 - cost(i, j) < iou_gate) continue;
      out.matches.emplace_back(i, j);
      det_used[i] = true;
      trk_used[j] = true;
    }
  }
  for (int i = 0; i < n; ++i)
    if (!det_used[i]) out.unmatched_detections.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!trk_used[j]) out.unmatched_tracks.push_back(j);
  return out;
}

// SORT-style manager for persistent world-frame parking slot states.
class SlotTracker {
 public:
  explicit SlotTracker(const TrackerConfig& config = TrackerConfig(),
                       const BevCalibration& calib = BevCalibration())
      : config_(config), calib_(calib) {}

  // Ingests one BEV frame. vehicle_pose is the estimated pose nearest the
  // detection timestamp; detections are body-frame and are annotated with
  // their track id in the returned copy.
  std::vector<SlotObservation> step(const std::vector<SlotObservation>& detections,
                                    const Pose& vehicle_pose, double t) {
    if (has_time_ && t <= last_t_)
      throw std::invalid_argument("SlotTracker::step: non-monotonic timestamp");

    // predict all live tracks to t
    for (auto& track : tracks_) {
      if (track.status == TrackStatus::kLost) continue;
      predict(track, t);
    }

    // world-frame detection quads
    std::vector<Quad> det_quads(detections.size());
    for (size_t i = 0; i < detections.size(); ++i) {
      for (int c = 0; c < 4; ++c) {
        const Vec3 w = vehicle_pose.apply(Vec3(detections[i].corners_body[c].x(),
                                               detections[i].corners_body[c].y(), 0.0));
        det_quads[i][c] = Vec2(w.x(), w.y());
      }
    }

    std::vector<int> live;
    std::vector<Quad> track_quads;
    for (size_t j = 0; j < tracks_.size(); ++j) {
      if (tracks_[j].status == TrackStatus::kLost) continue;
      live.push_back(static_cast<int>(j));
      track_quads.push_back(tracks_[j].corners_world());
    }

    const auto assoc = associate(det_quads, track_quads, config_.iou_gate);

    std::vector<SlotObservation> annotated = detections;
    for (const auto& [di, tj] : assoc.matches) {
      TrackedSlot& track = tracks_[live[tj]];
      const double d_norm = calib_.normalized_center_distance(detections[di].center_px());
      update(track, SlotMeasurement::from_corners(det_quads[di]), detections[di], t,
             1.0 + config_.meas_distance_gain * d_norm);
      annotated[di].track_id = track.id;
    }
    for (int tj : assoc.unmatched_tracks) {
      TrackedSlot& track = tracks_[live[tj]];
      track.misses += 1;
      if (track.misses > config_.max_age) track.status = TrackStatus::kLost;
    }
    for (int di : assoc.unmatched_detections) {
      annotated[di].track_id = spawn(SlotMeasurement::from_corners(det_quads[di]),
                                     detections[di], t);
    }

    last_t_ = t;
    has_time_ = true;
    return annotated;
  }

  const std::vector<TrackedSlot>& tracks() const { return tracks_; }

  std::vector<const TrackedSlot*> confirmed() const {
    std::vector<const TrackedSlot*> out;
    for (const auto& t : tracks_)
      if (t.status == TrackStatus::kConfirmed) out.push_back(&t);
    return out;
  }

  // World anchors for the backend PS term: confirmed tracks only.
  std::map<int, Vec2> anchors() const {
    std::map<int, Vec2> out;
    for (const auto& t : tracks_)
      if (t.status == TrackStatus::kConfirmed) out[t.id] = t.center_world();
    return out;
  }

  int next_id() const { return next_id_; }

 private:
  void predict(TrackedSlot& track, double t) {
    const double dt = has_time_ ? t - track.last_update_t : 0.0;
    if (dt <= 0) return;
    Eigen::Matrix<double, 7, 7> F = Eigen::Matrix<double, 7, 7>::Identity();
    F(0, 5) = dt;
    F(1, 6) = dt;
    track.x = F * track.x;
    Eigen::Matrix<double, 7, 1> q;
    q << config_.process_pos_std * config_.process_pos_std,
        config_.process_pos_std * config_.process_pos_std,
        config_.process_heading_std * config_.process_heading_std,
        config_.process_extent_std * config_.process_extent_std,
        config_.process_extent_std * config_.process_extent_std,
        config_.process_vel_std * config_.process_vel_std,
        config_.process_vel_std * config_.process_vel_std;
    track.P = F * track.P * F.transpose();
    track.P += (dt * q.asDiagonal()).toDenseMatrix();
  }

  void update(TrackedSlot& track, const SlotMeasurement& meas, const SlotObservation& obs,
              double t, double noise_scale = 1.0) {
    Eigen::Matrix<double, 5, 7> H = Eigen::Matrix<double, 5, 7>::Zero();
    H.block<5, 5>(0, 0).setIdentity();
    Eigen::Matrix<double, 5, 1> r;
    r << meas.center.x() - track.x[0], meas.center.y() - track.x[1],
        wrap_angle(meas.heading - track.x[2]), meas.width - track.x[3], meas.depth - track.x[4];
    const double s2 = noise_scale * noise_scale;
    Eigen::Matrix<double, 5, 1> noise;
    noise << s2 * config_.meas_pos_std * config_.meas_pos_std,
        s2 * config_.meas_pos_std * config_.meas_pos_std,
        s2 * config_.meas_heading_std * config_.meas_heading_std,
        s2 * config_.meas_extent_std * config_.meas_extent_std,
        s2 * config_.meas_extent_std * config_.meas_extent_std;
    const Eigen::Matrix<double, 5, 5> S =
        H * track.P * H.transpose() + noise.asDiagonal().toDenseMatrix();
    const Eigen::Matrix<double, 7, 5> K = track.P * H.transpose() * S.inverse();
    track.x += K * r;
    track.x[2] = wrap_angle(track.x[2]);
    const Eigen::Matrix<double, 7, 7> I_KH = Eigen::Matrix<double, 7, 7>::Identity() - K * H;
    // Joseph form keeps P symmetric PSD
    track.P = I_KH * track.P * I_KH.transpose() +
              K * noise.asDiagonal().toDenseMatrix() * K.transpose();

    track.hits += 1;
    track.misses = 0;
    track.last_update_t = t;
    if (track.status == TrackStatus::kTentative && track.hits >= config_.min_hits)
      track.status = TrackStatus::kConfirmed;
    if (obs.gt_slot_id >= 0) track.gt_slot_id = obs.gt_slot_id;

    track.votes.push_back(obs.occupancy);
    while (static_cast<int>(track.votes.size()) > config_.occupancy_votes) track.votes.pop_front();
    int occupied = 0;
    for (auto v : track.votes) occupied += v == Occupancy::kOccupied ? 1 : 0;
    track.occupancy = 2 * occupied > static_cast<int>(track.votes.size()) ? Occupancy::kOccupied
                                                                          : Occupancy::kVacant;
  }

  int spawn(const SlotMeasurement& meas, const SlotObservation& obs, double t) {
    TrackedSlot track;
    track.id = next_id_++;
    track.hits = 1;
    track.last_update_t = t;
    track.gt_slot_id = obs.gt_slot_id;
    track.x << meas.center.x(), meas.center.y(), meas.heading, meas.width, meas.depth, 0.0, 0.0;
    Eigen::Matrix<double, 7, 1> p0;
    p0 << config_.init_pos_std * config_.init_pos_std, config_.init_pos_std * config_.init_pos_std,
        config_.init_heading_std * config_.init_heading_std,
        config_.init_extent_std * config_.init_extent_std,
        config_.init_extent_std * config_.init_extent_std,
        config_.init_vel_std * config_.init_vel_std, config_.init_vel_std * config_.init_vel_std;
    track.P = p0.asDiagonal();
    track.votes.push_back(obs.occupancy);
    track.occupancy = obs.occupancy;
    if (config_.min_hits <= 1) track.status = TrackStatus::kConfirmed;
    tracks_.push_back(track);
    return track.id;
  }

  TrackerConfig config_;
  BevCalibration calib_;
  std::vector<TrackedSlot> tracks_;
  int next_id_ = 0;
  double last_t_ = 0;
  bool has_time_ = false;
};

// VISSLAM-style hard association: a registry of running-mean slot centers
// with fixed join/create distance thresholds. Detections landing between
// th1 and th2 are discarded as ambiguous.
class HardMatchRegistry {
 public:
  HardMatchRegistry(double th1 = 0.5, double th2 = 2.0) : th1_(th1), th2_(th2) {}

  struct Entry {
    int id;
    Vec2 mean;
    int count;
    int gt_slot_id;
  };

  // Returns the assigned slot id, or -1 when discarded.
  int match(const Vec2& center_world, int gt_slot_id = -1) {
    double best = std::numeric_limits<double>::infinity();
    Entry* best_entry = nullptr;
    for (auto& e : entries_) {
      const double d = (e.mean - center_world).norm();
      if (d < best) {
        best = d;
        best_entry = &e;
      }
    }
    if (best_entry != nullptr && best < th1_) {
      best_entry->mean = (best_entry->mean * best_entry->count + center_world) /
                         (best_entry->count + 1);
      best_entry->count += 1;
      return best_entry->id;
    }
    if (best_entry == nullptr || best > th2_) {
      entries_.push_back({next_id_++, center_world, 1, gt_slot_id});
      return entries_.back().id;
    }
    return -1;
  }

  std::vector<SlotObservation> step(const std::vector<SlotObservation>& detections,
                                    const Pose& vehicle_pose, double) {
    std::vector<SlotObservation> annotated = detections;
    for (auto& d : annotated) {
      const Vec2 cb = d.center_body();
      const Vec3 w = vehicle_pose.apply(Vec3(cb.x(), cb.y(), 0.0));
      d.track_id = match(Vec2(w.x(), w.y()), d.gt_slot_id);
    }
    return annotated;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  std::map<int, Vec2> anchors() const {
    std::map<int, Vec2> out;
    for (const auto& e : entries_) out[e.id] = e.mean;
    return out;
  }

 private:
  double th1_, th2_;
  std::vector<Entry> entries_;
  int next_id_ = 0;
};

}  // namespace parkvio
