#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/rng.hpp"
#include "parkvio/slots.hpp"
#include "parkvio/trajectory.hpp"
#include "parkvio/world.hpp"

#include <vector>

namespace parkvio {

constexpr double kGravity = 9.81;
inline Vec3 gravity_world() { return Vec3(0, 0, -kGravity); }

// All noise magnitudes; zeros everywhere give analytically exact streams.
// IMU densities are continuous-time (per sqrt(Hz)); the simulator scales
// them by sqrt(rate) when drawing per-sample noise.
struct NoiseModel {
  double gyro_noise_density = 0.0;    // rad/s/sqrt(Hz)
  double accel_noise_density = 0.0;   // m/s^2/sqrt(Hz)
  double gyro_bias = 0.0;             // constant per run, rad/s per axis
  double accel_bias = 0.0;            // constant per run, m/s^2 per axis
  double gyro_bias_walk = 0.0;        // rad/s/sqrt(s), optional random walk
  double accel_bias_walk = 0.0;       // m/s^2/sqrt(s)
  double wss_noise_std = 0.0;         // m/s
  double wss_scale_error = 0.0;       // multiplicative, drawn once per run
  double feature_pixel_noise_std = 0.0;  // normalized image units
  double feature_dropout_rate = 0.0;
  double ps_corner_noise_base_std = 0.0;   // meters
  double ps_corner_noise_distance_gain = 0.0;  // meters per unit normalized distance
  double ps_false_positive_rate = 0.0;  // expected spurious detections per frame
  double ps_miss_rate = 0.0;
  double ps_occupancy_flip_rate = 0.0;
  double ps_confidence_slope = 0.2;  // confidence = 1 - slope * d_norm + noise
  double ps_confidence_std = 0.0;

  void validate() const {
    const double vals[] = {gyro_noise_density, accel_noise_density, gyro_bias, accel_bias,
                           gyro_bias_walk, accel_bias_walk, wss_noise_std, wss_scale_error,
                           feature_pixel_noise_std, feature_dropout_rate, ps_corner_noise_base_std,
                           ps_corner_noise_distance_gain, ps_false_positive_rate, ps_miss_rate,
                           ps_occupancy_flip_rate, ps_confidence_std};
    for (double v : vals)
      if (v < 0 || !std::isfinite(v)) throw std::invalid_argument("NoiseModel: negative or non-finite entry");
  }

  static NoiseModel zero() { return NoiseModel{}; }

  // Defaults used by the benchmark harness for "noisy" runs. Matched to a
  // texture-poor underground lot: modest feature count, automotive-grade IMU.
  static NoiseModel standard() {
    NoiseModel n;
    n.gyro_noise_density = 3e-3;
    n.accel_noise_density = 3e-2;
    n.gyro_bias = 4e-3;
    n.accel_bias = 8e-2;
    n.wss_noise_std = 0.1;
    n.wss_scale_error = 0.01;
    n.feature_pixel_noise_std = 3.0 / 460.0;
    n.feature_dropout_rate = 0.15;
    n.ps_corner_noise_base_std = 0.03;
    n.ps_corner_noise_distance_gain = 0.10;
    n.ps_miss_rate = 0.08;
    n.ps_false_positive_rate = 0.02;
    n.ps_occupancy_flip_rate = 0.02;
    n.ps_confidence_std = 0.05;
    return n;
  }
};

struct ImuSample {
  double t = 0;
  Vec3 gyro{0, 0, 0};   // rad/s, body frame
  Vec3 accel{0, 0, 0};  // m/s^2, specific force (includes gravity reaction)
};

struct WssSample {
  double t = 0;
  double speed = 0;  // m/s, forward body speed
};

struct FeatureObservation {
  int landmark_id = -1;
  Vec2 uv{0, 0};  // normalized image plane
};

struct CameraFrame {
  double t = 0;
  std::vector<FeatureObservation> features;
};

struct BevFrame {
  double t = 0;
  std::vector<SlotObservation> detections;
};

struct SensorRates {
  double imu_hz = 100.0;
  double camera_hz = 20.0;
  double bev_hz = 10.0;
};

struct SensorLog {
  SensorRates rates;
  std::vector<ImuSample> imu;
  std::vector<WssSample> wss;
  std::vector<CameraFrame> frames;
  std::vector<BevFrame> bev;
};

// Detector model: keeps slots whose center lies inside the BEV coverage,
// corner noise grows with the normalized pixel distance of the slot center
// from the image center, detections below 0.5 confidence are dropped.
inline std::vector<SlotObservation> simulate_ps_detections(const ParkingLotWorld& world,
                                                           const Pose& pose,
                                                           const BevCalibration& calib,
                                                           const NoiseModel& noise, Rng& rng) {
  std::vector<SlotObservation> out;
  for (const auto& slot : world.slots) {
    const Vec3 center_body3 = world_to_body(Vec3(slot.center.x(), slot.center.y(), 0.0), pose);
    const Vec2 center_body(center_body3.x(), center_body3.y());
    if (!calib.body_point_in_coverage(center_body)) continue;
    if (noise.ps_miss_rate > 0 && rng.bernoulli(noise.ps_miss_rate)) continue;

    const double d_norm = calib.normalized_center_distance(calib.body_to_bev(center_body));
    const double corner_std =
        noise.ps_corner_noise_base_std + noise.ps_corner_noise_distance_gain * d_norm;

    SlotObservation obs;
    obs.gt_slot_id = slot.id;
    const auto world_corners = slot.corners();
    for (int i = 0; i < 4; ++i) {
      const Vec3 cb = world_to_body(Vec3(world_corners[i].x(), world_corners[i].y(), 0.0), pose);
      Vec2 body(cb.x(), cb.y());
      if (corner_std > 0)
        body += Vec2(rng.normal(0, corner_std), rng.normal(0, corner_std));
      obs.corners_body[i] = body;
      obs.corners_px[i] = calib.body_to_bev(body);
    }
    obs.occupancy = slot.occupancy;
    if (noise.ps_occupancy_flip_rate > 0 && rng.bernoulli(noise.ps_occupancy_flip_rate))
      obs.occupancy = obs.occupancy == Occupancy::kVacant ? Occupancy::kOccupied : Occupancy::kVacant;
    double conf = 1.0 - noise.ps_confidence_slope * d_norm;
    if (noise.ps_confidence_std > 0) conf += rng.normal(0, noise.ps_confidence_std);
    obs.confidence = std::clamp(conf, 0.0, 1.0);
    if (obs.confidence < 0.5) continue;  // detector keeps > 50% probability only
    out.push_back(obs);
  }
  if (noise.ps_false_positive_rate > 0 && rng.bernoulli(noise.ps_false_positive_rate)) {
    // one spurious rectangle somewhere in coverage
    SlotObservation fp;
    fp.gt_slot_id = -1;
    ParkingSlot ghost;
    ghost.center = Vec2(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
    ghost.heading = rng.uniform(0, 2 * M_PI);
    const auto corners = ghost.corners();
    for (int i = 0; i < 4; ++i) {
      fp.corners_body[i] = corners[i];
      fp.corners_px[i] = calib.body_to_bev(corners[i]);
    }
    fp.confidence = rng.uniform(0.5, 0.7);
    fp.occupancy = rng.bernoulli(0.5) ? Occupancy::kOccupied : Occupancy::kVacant;
    out.push_back(fp);
  }
  return out;
}

// Generates the multi-rate sensor log for one trajectory through one world.
// With a zero noise model every stream is the exact analytic value.
inline SensorLog simulate_sensors(const ParkingLotWorld& world, const GroundTruthTrajectory& traj,
                                  const NoiseModel& noise, uint64_t seed,
                                  const BevCalibration& calib = BevCalibration(),
                                  const SensorRates& rates = SensorRates()) {
  noise.validate();
  if (traj.duration() <= 0) throw std::invalid_argument("simulate_sensors: empty trajectory");

  SensorLog log;
  log.rates = rates;
  const double T = traj.duration();

  Rng imu_rng(seed, 1);
  Rng wss_rng(seed, 2);
  Rng cam_rng(seed, 3);
  Rng bev_rng(seed, 4);

  const Vec3 bias_g = Vec3::Ones() * noise.gyro_bias;
  const Vec3 bias_a = Vec3::Ones() * noise.accel_bias;
  const double wss_scale = 1.0 + (noise.wss_scale_error > 0
                                      ? wss_rng.normal(0, noise.wss_scale_error)
                                      : 0.0);

  // IMU + WSS share the 100 Hz clock
  const double imu_dt = 1.0 / rates.imu_hz;
  const double sigma_g = noise.gyro_noise_density * std::sqrt(rates.imu_hz);
  const double sigma_a = noise.accel_noise_density * std::sqrt(rates.imu_hz);
  Vec3 walk_g = Vec3::Zero(), walk_a = Vec3::Zero();
  const int n_imu = static_cast<int>(std::floor(T / imu_dt + 1e-9)) + 1;
  for (int i = 0; i < n_imu; ++i) {
    const double t = i * imu_dt;
    const auto s = traj.at(t);
    const Mat3 R_T = s.pose.rotation().transpose();
    ImuSample imu;
    imu.t = t;
    imu.gyro = s.angular_velocity + bias_g + walk_g;
    imu.accel = R_T * (s.acceleration - gravity_world()) + bias_a + walk_a;
    if (sigma_g > 0)
      imu.gyro += Vec3(imu_rng.normal(0, sigma_g), imu_rng.normal(0, sigma_g), imu_rng.normal(0, sigma_g));
    if (sigma_a > 0)
      imu.accel += Vec3(imu_rng.normal(0, sigma_a), imu_rng.normal(0, sigma_a), imu_rng.normal(0, sigma_a));
    log.imu.push_back(imu);

    WssSample w;
    w.t = t;
    w.speed = wss_scale * s.velocity.norm();
    if (noise.wss_noise_std > 0) w.speed += wss_rng.normal(0, noise.wss_noise_std);
    log.wss.push_back(w);

    if (noise.gyro_bias_walk > 0)
      walk_g += std::sqrt(imu_dt) * noise.gyro_bias_walk *
                Vec3(imu_rng.normal(), imu_rng.normal(), imu_rng.normal());
    if (noise.accel_bias_walk > 0)
      walk_a += std::sqrt(imu_dt) * noise.accel_bias_walk *
                Vec3(imu_rng.normal(), imu_rng.normal(), imu_rng.normal());
  }

  // camera frames
  FrontCamera camera;
  camera.cam_in_body = calib.cam_in_body;
  const double cam_dt = 1.0 / rates.camera_hz;
  const int n_cam = static_cast<int>(std::floor(T / cam_dt + 1e-9)) + 1;
  for (int i = 0; i < n_cam; ++i) {
    CameraFrame frame;
    frame.t = i * cam_dt;
    const auto s = traj.at(frame.t);
    for (const auto& lm : world.landmarks) {
      const Vec3 p_body = world_to_body(lm.position, s.pose);
      if (!camera.visible(p_body)) continue;
      if (noise.feature_dropout_rate > 0 && cam_rng.bernoulli(noise.feature_dropout_rate)) continue;
      FeatureObservation f;
      f.landmark_id = lm.id;
      f.uv = camera.project(p_body);
      if (noise.feature_pixel_noise_std > 0)
        f.uv += Vec2(cam_rng.normal(0, noise.feature_pixel_noise_std),
                     cam_rng.normal(0, noise.feature_pixel_noise_std));
      frame.features.push_back(f);
    }
    log.frames.push_back(frame);
  }

  // BEV slot detections
  const double bev_dt = 1.0 / rates.bev_hz;
  const int n_bev = static_cast<int>(std::floor(T / bev_dt + 1e-9)) + 1;
  for (int i = 0; i < n_bev; ++i) {
    BevFrame frame;
    frame.t = i * bev_dt;
    const auto s = traj.at(frame.t);
    frame.detections = simulate_ps_detections(world, s.pose, calib, noise, bev_rng);
    for (auto& d : frame.detections) d.t = frame.t;
    log.bev.push_back(frame);
  }

  return log;
}

}  // namespace parkvio
