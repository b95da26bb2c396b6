#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/sensors.hpp"
#include "parkvio/slots.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace parkvio {

enum class FeatureSource { kNatural, kPsCorner };

struct SlotCornerLink {
  int slot_track_id = -1;
  int corner_index = -1;
};

struct TrackObservation {
  int frame_id = -1;
  Vec2 uv{0, 0};  // normalized image plane
};

struct FeatureTrack {
  int feature_id = -1;
  FeatureSource source = FeatureSource::kNatural;
  std::vector<TrackObservation> observations;
  std::optional<SlotCornerLink> linked_slot;

  const TrackObservation* observation_at(int frame_id) const {
    for (auto it = observations.rbegin(); it != observations.rend(); ++it) {
      if (it->frame_id == frame_id) return &*it;
      if (it->frame_id < frame_id) break;
    }
    return nullptr;
  }
};

struct FrontendConfig {
  int max_features = 110;
  double min_feature_separation = 30.0 / 460.0;
  double parallax_threshold = 10.0 / 460.0;
  int min_tracked_for_keyframe = 20;
  double outlier_jump_gate = 60.0 / 460.0;  // per-frame normalized motion gate

  void validate() const {
    if (max_features < 10) throw std::invalid_argument("FrontendConfig: max_features must be >= 10");
  }
};

struct KeyframeDecision {
  bool keyframe = false;
  bool forced = false;  // no shared tracks with the previous keyframe
  double mean_parallax = 0;
  int shared_tracks = 0;
};

// Pure keyframe criterion on two per-frame feature snapshots
// (feature id -> normalized coordinates).
inline KeyframeDecision select_keyframe(const std::map<int, Vec2>& prev_keyframe,
                                        const std::map<int, Vec2>& current,
                                        const FrontendConfig& config) {
  KeyframeDecision d;
  double parallax_sum = 0;
  for (const auto& [id, uv] : current) {
    const auto it = prev_keyframe.find(id);
    if (it == prev_keyframe.end()) continue;
    parallax_sum += (uv - it->second).norm();
    d.shared_tracks += 1;
  }
  if (d.shared_tracks == 0) {
    d.keyframe = true;
    d.forced = true;
    return d;
  }
  d.mean_parallax = parallax_sum / d.shared_tracks;
  d.keyframe = d.mean_parallax > config.parallax_threshold ||
               static_cast<int>(current.size()) < config.min_tracked_for_keyframe;
  return d;
}

// Feature track store. The simulator supplies ground-truth landmark
// correspondence, so detection and optical flow reduce to id bookkeeping
// plus the admission, separation, outlier and budget rules.
class FeatureTracker {
 public:
  explicit FeatureTracker(const FrontendConfig& config = FrontendConfig()) : config_(config) {
    config_.validate();
  }

  // Camera frame with stable landmark ids. Returns the frame id assigned.
  int ingest_frame(const std::vector<FeatureObservation>& observations, double t) {
    frame_id_ += 1;
    frame_time_ = t;
    current_frame_.clear();

    std::map<int, const FeatureObservation*> by_landmark;
    for (const auto& obs : observations) {
      if (!by_landmark.emplace(obs.landmark_id, &obs).second)
        throw std::invalid_argument("ingest_frame: duplicate feature in one frame");
    }

    // extend known tracks, gating on implausible jumps
    int active_natural = 0;
    std::vector<std::pair<int, const FeatureObservation*>> candidates;
    for (const auto& [lm_id, obs] : by_landmark) {
      const auto it = natural_by_landmark_.find(lm_id);
      if (it == natural_by_landmark_.end()) {
        candidates.emplace_back(lm_id, obs);
        continue;
      }
      FeatureTrack& track = tracks_[it->second];
      if (!track.observations.empty() &&
          frame_id_ - track.observations.back().frame_id <= 2 &&
          (obs->uv - track.observations.back().uv).norm() > config_.outlier_jump_gate)
        continue;  // outlier jump dropped
      track.observations.push_back({frame_id_, obs->uv});
      current_frame_[track.feature_id] = obs->uv;
      active_natural += 1;
    }

    // over-budget eviction: keep the longest tracks
    if (active_natural > config_.max_features) {
      std::vector<std::pair<size_t, int>> by_length;  // (length, feature id)
      for (const auto& [fid, uv] : current_frame_) {
        const FeatureTrack& tr = tracks_[index_of_.at(fid)];
        if (tr.source == FeatureSource::kNatural)
          by_length.emplace_back(tr.observations.size(), fid);
      }
      std::sort(by_length.begin(), by_length.end(),
                [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
      for (size_t k = config_.max_features; k < by_length.size(); ++k) {
        const int fid = by_length[k].second;
        FeatureTrack& tr = tracks_[index_of_.at(fid)];
        tr.observations.pop_back();
        current_frame_.erase(fid);
        active_natural -= 1;
      }
    }

    // admit new tracks up to the budget, enforcing spatial separation
    for (const auto& [lm_id, obs] : candidates) {
      if (active_natural >= config_.max_features) break;
      if (!separated(obs->uv)) continue;
      FeatureTrack track;
      track.feature_id = next_feature_id_++;
      track.source = FeatureSource::kNatural;
      track.observations.push_back({frame_id_, obs->uv});
      index_of_[track.feature_id] = tracks_.size();
      natural_by_landmark_[lm_id] = tracks_.size();
      current_frame_[track.feature_id] = obs->uv;
      tracks_.push_back(std::move(track));
      active_natural += 1;
    }

    return frame_id_;
  }

  // Slot corner points become (or extend) dedicated tracks keyed by
  // (slot track id, corner index). Always admitted, exempt from the
  // feature budget; only corners inside the front camera view are used.
  // Applies to the current frame; expects tracker-annotated observations.
  void merge_ps_corners(const std::vector<SlotObservation>& ps_observations,
                        const BevCalibration& calib) {
    FrontCamera camera;
    camera.cam_in_body = calib.cam_in_body;
    for (const auto& obs : ps_observations) {
      if (obs.track_id < 0) continue;
      for (int c = 0; c < 4; ++c) {
        const Vec3 p_body(obs.corners_body[c].x(), obs.corners_body[c].y(), 0.0);
        if (!camera.visible(p_body)) continue;
        const Vec2 uv = camera.project(p_body);
        const auto key = std::make_pair(obs.track_id, c);
        auto it = ps_by_link_.find(key);
        if (it == ps_by_link_.end()) {
          FeatureTrack track;
          track.feature_id = next_feature_id_++;
          track.source = FeatureSource::kPsCorner;
          track.linked_slot = SlotCornerLink{obs.track_id, c};
          track.observations.push_back({frame_id_, uv});
          index_of_[track.feature_id] = tracks_.size();
          ps_by_link_[key] = tracks_.size();
          current_frame_[track.feature_id] = uv;
          tracks_.push_back(std::move(track));
        } else {
          FeatureTrack& track = tracks_[it->second];
          if (!track.observations.empty() && track.observations.back().frame_id == frame_id_)
            continue;  // at most one observation per frame
          track.observations.push_back({frame_id_, uv});
          current_frame_[track.feature_id] = uv;
        }
      }
    }
  }

  const std::map<int, Vec2>& current_frame_features() const { return current_frame_; }
  int current_frame_id() const { return frame_id_; }
  double current_frame_time() const { return frame_time_; }

  const std::vector<FeatureTrack>& tracks() const { return tracks_; }

  const FeatureTrack& track_of(int feature_id) const { return tracks_[index_of_.at(feature_id)]; }

  int active_natural_count() const {
    int n = 0;
    for (const auto& [fid, uv] : current_frame_)
      if (tracks_[index_of_.at(fid)].source == FeatureSource::kNatural) n += 1;
    return n;
  }

  int active_ps_count() const {
    return static_cast<int>(current_frame_.size()) - active_natural_count();
  }

 private:
  bool separated(const Vec2& uv) const {
    for (const auto& [fid, existing] : current_frame_)
      if ((existing - uv).norm() < config_.min_feature_separation) return false;
    return true;
  }

  FrontendConfig config_;
  std::vector<FeatureTrack> tracks_;
  std::map<int, size_t> index_of_;             // feature id -> track index
  std::map<int, size_t> natural_by_landmark_;  // landmark id -> track index
  std::map<std::pair<int, int>, size_t> ps_by_link_;
  std::map<int, Vec2> current_frame_;
  int next_feature_id_ = 0;
  int frame_id_ = -1;
  double frame_time_ = 0;
};

}  // namespace parkvio
