#pragma once

#include "parkvio/ekf.hpp"
#include "parkvio/frontend.hpp"
#include "parkvio/sensors.hpp"
#include "parkvio/solver.hpp"
#include "parkvio/tracker.hpp"

#include <deque>
#include <limits>
#include <set>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace parkvio {

enum class AssociationMode { kSort, kHardMatch };

struct EstimatorConfig {
  FrontendConfig frontend;
  BackendConfig backend;
  TrackerConfig tracker;
  NoiseModel est_noise;  // factor weighting; floors applied by the pipeline
  AssociationMode association = AssociationMode::kSort;
  double hard_match_th1 = 0.5;
  double hard_match_th2 = 2.0;
};

struct TrackHistoryRow {
  double t = 0;
  int id = -1;
  int gt_slot_id = -1;
  Quad corners_world;
  Occupancy occupancy = Occupancy::kVacant;
  TrackStatus status = TrackStatus::kTentative;
};

// (t, gt slot id, assigned id) per matched detection, for id-switch counts
struct AssociationRow {
  double t = 0;
  int gt_slot_id = -1;
  int assigned_id = -1;
};

struct EstimatorResult {
  std::vector<TimedPose> odometry;  // keyframe poses, final (smoothed) values
  std::vector<SolveReport> reports;
  std::vector<TrackHistoryRow> track_history;
  std::vector<AssociationRow> associations;
  int keyframes = 0;
  int duplicate_slots = 0;  // registry/tracker entries beyond one per true slot
  bool failed = false;
  std::string failure;
};

// Tightly-coupled sliding-window estimator. Consumes a sensor log in
// timestamp order: camera frames drive the frontend and keyframe creation,
// BEV detections drive the slot tracker (with IMU-propagated poses) and
// become PS factors attached to the nearest keyframe.
class Estimator {
 public:
  Estimator(const EstimatorConfig& config, const BevCalibration& calib,
            const KeyframeState& initial_state)
      : config_(config), calib_(calib), tracker_(config.tracker, calib),
        hard_match_(config.hard_match_th1, config.hard_match_th2), frontend_(config.frontend) {
    window_.cam_in_body = calib.cam_in_body;
    prop_ = initial_state;
    initial_ = initial_state;
  }

  // final window state, for diagnostics and tests
  const SlidingWindow& window() const { return window_; }

  EstimatorResult process(const SensorLog& log) {
    EstimatorResult result;
    try {
      run(log, result);
    } catch (const std::exception& e) {
      result.failed = true;
      result.failure = e.what();
    }
    finalize(result);
    return result;
  }

 private:
  struct PendingBev {
    double t = 0;
    std::vector<SlotObservation> detections;  // tracker-annotated
    Pose prop_pose;
  };

  void run(const SensorLog& log, EstimatorResult& result) {
    size_t imu_i = 0, bev_i = 0;
    for (const auto& frame : log.frames) {
      // pull IMU/WSS up to the frame time, propagating the high-rate state
      while (imu_i < log.imu.size() && log.imu[imu_i].t <= frame.t + 1e-9) {
        push_imu(log.imu[imu_i], log.wss[imu_i]);
        ++imu_i;
      }
      // BEV frames at or before this camera frame
      while (bev_i < log.bev.size() && log.bev[bev_i].t <= frame.t + 1e-9) {
        handle_bev(log.bev[bev_i], result);
        ++bev_i;
      }

      frontend_.ingest_frame(frame.features, frame.t);
      if (config_.backend.enable_ps_frontend && !pending_bev_.empty() &&
          std::abs(pending_bev_.back().t - frame.t) < 1e-9) {
        frontend_.merge_ps_corners(pending_bev_.back().detections, calib_);
      }

      const auto& snapshot = frontend_.current_frame_features();
      bool make = false;
      if (window_.size() == 0) {
        make = true;
      } else {
        make = select_keyframe(last_kf_snapshot_, snapshot, config_.frontend).keyframe;
      }
      if (make) make_keyframe(frame.t, snapshot, result);
    }
  }

  void push_imu(const ImuSample& imu, const WssSample& wss) {
    if (!imu_buffer_.empty()) {
      // midpoint propagation of the high-rate state
      const ImuSample& prev = imu_buffer_.back();
      const double dt = imu.t - prev.t;
      if (dt > 0) {
        const Vec3 w_hat = 0.5 * (prev.gyro + imu.gyro) - prop_.bias.gyro;
        const Mat3 R0 = prop_.q.toRotationMatrix();
        const Quat q1 = (prop_.q * exp_so3(w_hat * dt)).normalized();
        const Vec3 a = 0.5 * (R0 * (prev.accel - prop_.bias.accel) +
                              q1.toRotationMatrix() * (imu.accel - prop_.bias.accel)) +
                       gravity_world();
        prop_.p += prop_.v * dt + 0.5 * a * dt * dt;
        prop_.v += a * dt;
        prop_.q = q1;
        prop_.t = imu.t;
      }
    } else {
      prop_.t = imu.t;
    }
    imu_buffer_.push_back(imu);
    wss_buffer_.push_back(wss);
  }

  void handle_bev(const BevFrame& frame, EstimatorResult& result) {
    const Pose pose = prop_.pose();
    std::vector<SlotObservation> annotated;
    if (config_.association == AssociationMode::kSort)
      annotated = tracker_.step(frame.detections, pose, frame.t);
    else
      annotated = hard_match_.step(frame.detections, pose, frame.t);
    pending_bev_.push_back({frame.t, annotated, pose});

    for (const auto& d : annotated) {
      if (d.track_id < 0 || d.gt_slot_id < 0) continue;
      result.associations.push_back({frame.t, d.gt_slot_id, d.track_id});
    }
    if (config_.association == AssociationMode::kSort) {
      for (const auto& tr : tracker_.tracks()) {
        if (tr.status == TrackStatus::kLost) continue;
        result.track_history.push_back(
            {frame.t, tr.id, tr.gt_slot_id, tr.corners_world(), tr.occupancy, tr.status});
      }
    }
  }

  void make_keyframe(double t, const std::map<int, Vec2>& snapshot, EstimatorResult& result) {
    const long kf_id = next_kf_id_++;
    result.keyframes += 1;

    if (window_.size() == 0) {
      KeyframeState s = initial_;
      s.t = t;
      window_.ids.push_back(kf_id);
      window_.states.push_back(s);
      kf_snapshots_.push_back(snapshot);
      kf_prop_poses_.push_back(prop_.pose());
      kf_times_.push_back(t);
      last_kf_snapshot_ = snapshot;
      reseed_buffers(t);
      attach_pending_bev(t);  // tracker warm-up frames before the first keyframe
      pending_bev_.clear();
      return;
    }

    // preintegrate the buffered interval
    const KeyframeState& prev = window_.states.back();
    auto link = integrate(imu_buffer_, wss_buffer_, prev.bias, config_.est_noise);
    const double T = link.dt_total;

    KeyframeState s;
    s.t = t;
    s.bias = prev.bias;
    s.q = (prev.q * link.delta_q).normalized();
    s.v = prev.v + gravity_world() * T + prev.q * link.delta_v;
    s.p = prev.p + prev.v * T + 0.5 * gravity_world() * T * T + prev.q * link.delta_p;

    window_.ids.push_back(kf_id);
    window_.states.push_back(s);
    window_.link_sqrt_info.push_back(preint_sqrt_info(link.covariance));
    window_.links.push_back(std::move(link));
    kf_snapshots_.push_back(snapshot);
    kf_prop_poses_.push_back(prop_.pose());
    kf_times_.push_back(t);

    update_landmarks(snapshot);
    attach_pending_bev(t);
    pending_bev_.clear();
    refresh_ps_anchors();

    if (window_.size() >= 2) {
      result.reports.push_back(optimize_window(window_, config_.backend));
    }

    // reset the high-rate propagation to the freshly optimized estimate
    prop_ = window_.states.back();
    prop_.t = t;
    reseed_buffers(t);
    last_kf_snapshot_ = snapshot;

    if (config_.backend.enable_marginalization &&
        window_.size() > config_.backend.window_size) {
      slide_window(result);
    }
  }

  void reseed_buffers(double t) {
    if (!imu_buffer_.empty()) {
      const ImuSample boundary = imu_buffer_.back();
      const WssSample boundary_w = wss_buffer_.back();
      imu_buffer_.clear();
      wss_buffer_.clear();
      if (std::abs(boundary.t - t) < 1e-9) {
        imu_buffer_.push_back(boundary);
        wss_buffer_.push_back(boundary_w);
      }
    }
  }

  void update_landmarks(const std::map<int, Vec2>& snapshot) {
    const int current = window_.size() - 1;
    for (const auto& [fid, uv] : snapshot) {
      const auto it = landmark_of_.find(fid);
      if (it != landmark_of_.end()) {
        window_.landmarks[it->second].observations.emplace_back(current, uv);
        continue;
      }
      // first window keyframe (not yet consumed) that also saw this feature
      const long consumed_until =
          consumed_.count(fid) ? consumed_.at(fid) : std::numeric_limits<long>::min();
      int anchor = -1;
      Vec2 anchor_uv;
      for (int k = 0; k < current; ++k) {
        if (window_.ids[k] <= consumed_until) continue;
        const auto obs = kf_snapshots_[k].find(fid);
        if (obs == kf_snapshots_[k].end()) continue;
        anchor = k;
        anchor_uv = obs->second;
        break;
      }
      if (anchor < 0) continue;  // needs two sightings before it becomes a landmark

      LandmarkParam lm;
      lm.feature_id = fid;
      lm.anchor = anchor;
      lm.anchor_uv = anchor_uv;
      lm.ps_corner = frontend_.track_of(fid).source == FeatureSource::kPsCorner;
      lm.inv_depth = triangulate_inv_depth(anchor, anchor_uv, current, uv);
      // observations at every later window keyframe that saw the feature
      for (int k = anchor + 1; k <= current; ++k) {
        const auto obs = kf_snapshots_[k].find(fid);
        if (obs != kf_snapshots_[k].end()) lm.observations.emplace_back(k, obs->second);
      }
      if (lm.observations.empty()) continue;
      landmark_of_[fid] = window_.landmarks.size();
      window_.landmarks.push_back(std::move(lm));
    }
  }

  double triangulate_inv_depth(int anchor, const Vec2& uv_a, int obs_kf, const Vec2& uv_o) const {
    const Pose cam = window_.cam_in_body;
    const Pose Ta = compose(window_.states[anchor].pose(), cam);
    const Pose To = compose(window_.states[obs_kf].pose(), cam);
    const Vec3 ra = Ta.q * Vec3(uv_a.x(), uv_a.y(), 1.0);  // unnormalized anchor ray
    const Vec3 ro = To.q * Vec3(uv_o.x(), uv_o.y(), 1.0);
    const Vec3 b = To.t - Ta.t;
    // least squares for [s, u]: s*ra - u*ro = b
    Eigen::Matrix2d A;
    A << ra.dot(ra), -ra.dot(ro), ra.dot(ro), -ro.dot(ro);
    Eigen::Vector2d rhs(ra.dot(b), ro.dot(b));
    const double det = A.determinant();
    double depth = 5.0;
    if (std::abs(det) > 1e-9) {
      const Eigen::Vector2d su = A.inverse() * rhs;
      if (std::isfinite(su[0])) depth = su[0];
    }
    return 1.0 / std::clamp(depth, 0.6, 30.0);
  }

  void attach_pending_bev(double t_new) {
    if (!config_.backend.enable_ps_backend || window_.size() == 0) return;
    const double t_prev = window_.size() >= 2 ? kf_times_[window_.size() - 2] : -1e300;
    const auto anchors =
        config_.association == AssociationMode::kSort ? tracker_.anchors() : hard_match_.anchors();

    for (const auto& entry : pending_bev_) {
      const bool to_new = std::abs(entry.t - t_new) <= std::abs(entry.t - t_prev);
      const int kf_local = to_new ? window_.size() - 1 : window_.size() - 2;
      if (kf_local < 0) continue;
      const Pose kf_prop = kf_prop_poses_[kf_local];
      // move the body-frame observation to the keyframe timestamp using the
      // relative propagated motion
      const Pose rel = compose(kf_prop.inverse(), entry.prop_pose);

      std::vector<PsFactor> frame_factors;
      std::vector<double> distances;
      for (const auto& d : entry.detections) {
        if (d.track_id < 0) continue;
        const auto anchor = anchors.find(d.track_id);
        if (anchor == anchors.end()) continue;
        const Vec2 cb = d.center_body();
        const Vec3 compensated = rel.apply(Vec3(cb.x(), cb.y(), 0.0));
        PsFactor f;
        f.kf = kf_local;
        f.slot_id = d.track_id;
        f.center_body = compensated.head<2>();
        f.anchor_world = anchor->second;
        frame_factors.push_back(f);
        distances.push_back(calib_.normalized_center_distance(d.center_px()));
      }
      if (frame_factors.empty()) continue;
      if (config_.backend.enable_reweighting) {
        const auto alphas = ps_weights(distances);
        for (size_t i = 0; i < frame_factors.size(); ++i) frame_factors[i].alpha = alphas[i];
      } else {
        for (auto& f : frame_factors) f.alpha = 1.0;
      }
      for (auto& f : frame_factors) window_.ps_factors.push_back(f);
    }
  }

  // All factors of one slot share the tracker's current world state, so the
  // registration term stays mutually consistent across the window.
  void refresh_ps_anchors() {
    if (window_.ps_factors.empty()) return;
    const auto anchors =
        config_.association == AssociationMode::kSort ? tracker_.anchors() : hard_match_.anchors();
    for (auto& f : window_.ps_factors) {
      const auto it = anchors.find(f.slot_id);
      if (it != anchors.end()) f.anchor_world = it->second;
    }
  }

  void slide_window(EstimatorResult& result) {
    auto prior = marginalize_oldest(window_, config_.backend);

    // emit the outgoing keyframe with its final estimate
    result.odometry.push_back({window_.states[0].t, window_.states[0].pose()});

    // consume landmarks anchored at the outgoing keyframe
    std::map<int, size_t> new_landmark_of;
    std::vector<LandmarkParam> kept;
    for (auto& lm : window_.landmarks) {
      if (lm.anchor == 0) {
        consumed_[lm.feature_id] = window_.ids.back();
        continue;
      }
      LandmarkParam shifted = std::move(lm);
      shifted.anchor -= 1;
      std::vector<std::pair<int, Vec2>> obs;
      for (auto& [kf, uv] : shifted.observations)
        if (kf != 0) obs.emplace_back(kf - 1, uv);
      shifted.observations = std::move(obs);
      new_landmark_of[shifted.feature_id] = kept.size();
      kept.push_back(std::move(shifted));
    }
    window_.landmarks = std::move(kept);
    landmark_of_ = std::move(new_landmark_of);

    std::vector<PsFactor> kept_ps;
    for (auto& f : window_.ps_factors) {
      if (f.kf == 0) continue;
      f.kf -= 1;
      kept_ps.push_back(f);
    }
    window_.ps_factors = std::move(kept_ps);

    window_.ids.erase(window_.ids.begin());
    window_.states.erase(window_.states.begin());
    window_.links.erase(window_.links.begin());
    window_.link_sqrt_info.erase(window_.link_sqrt_info.begin());
    kf_snapshots_.erase(kf_snapshots_.begin());
    kf_prop_poses_.erase(kf_prop_poses_.begin());
    kf_times_.erase(kf_times_.begin());
    window_.prior = std::move(prior);
  }

  void finalize(EstimatorResult& result) {
    for (int k = 0; k < window_.size(); ++k)
      result.odometry.push_back({window_.states[k].t, window_.states[k].pose()});

    // duplicates: distinct assigned ids per ground-truth slot beyond the first
    std::map<int, std::set<int>> ids_per_slot;
    for (const auto& row : result.associations)
      ids_per_slot[row.gt_slot_id].insert(row.assigned_id);
    for (const auto& [slot, ids] : ids_per_slot)
      result.duplicate_slots += static_cast<int>(ids.size()) - 1;
  }

  EstimatorConfig config_;
  BevCalibration calib_;
  SlotTracker tracker_;
  HardMatchRegistry hard_match_;
  FeatureTracker frontend_;

  SlidingWindow window_;
  std::vector<std::map<int, Vec2>> kf_snapshots_;
  std::vector<Pose> kf_prop_poses_;
  std::vector<double> kf_times_;
  std::map<int, size_t> landmark_of_;
  std::map<int, long> consumed_;

  std::vector<ImuSample> imu_buffer_;
  std::vector<WssSample> wss_buffer_;
  std::vector<PendingBev> pending_bev_;
  std::map<int, Vec2> last_kf_snapshot_;

  KeyframeState prop_;
  KeyframeState initial_;
  long next_kf_id_ = 0;
};

}  // namespace parkvio
