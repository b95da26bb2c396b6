#pragma once

#include "parkvio/eval.hpp"

#include <chrono>
#include <optional>

namespace parkvio {

enum class Method {
  kFull,
  kVinsStyle,       // PS fully disabled
  kFrontendPsOnly,
  kBackendPsOnly,
  kEkf,
  kHardMatchAssociation,
};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kFull: return "full";
    case Method::kVinsStyle: return "vins_style";
    case Method::kFrontendPsOnly: return "frontend_ps_only";
    case Method::kBackendPsOnly: return "backend_ps_only";
    case Method::kEkf: return "ekf";
    case Method::kHardMatchAssociation: return "hard_match_association";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  for (auto m : {Method::kFull, Method::kVinsStyle, Method::kFrontendPsOnly,
                 Method::kBackendPsOnly, Method::kEkf, Method::kHardMatchAssociation})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown method: " + s);
}

struct Dataset {
  ParkingLotWorld world;
  io::StoredTrajectory trajectory;
  SensorLog log;
  NoiseModel noise;
  BevCalibration calib;
  std::string kind;
  uint64_t seed = 0;
};

struct DatasetSpec {
  TrajectoryKind kind = TrajectoryKind::kRound;
  double length = 0;  // 0: paper default for the kind
  double speed = 0;
  uint64_t seed = 0;
  NoiseModel noise;
  WorldSpec world;
};

inline Vec2 default_start(TrajectoryKind kind) {
  return kind == TrajectoryKind::kRound ? Vec2(10.0, 9.0) : Vec2(4.0, 9.0);
}

inline Dataset simulate_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.world = generate_world(spec.world, spec.seed);
  TrajectoryParams params;
  params.kind = spec.kind;
  params.length = spec.length;
  params.speed = spec.speed;
  params.start = default_start(spec.kind);
  const auto traj = generate_trajectory(params);
  ds.log = simulate_sensors(ds.world, traj, spec.noise, spec.seed, ds.calib);
  ds.noise = spec.noise;
  ds.kind = to_string(spec.kind);
  ds.seed = spec.seed;
  // store the dense ground truth for evaluation
  io::StoredTrajectory stored;
  stored.kind = spec.kind;
  stored.speed = traj.speed();
  stored.arc_length = traj.arc_length();
  stored.duration = traj.duration();
  stored.samples = traj.sampled();
  ds.trajectory = std::move(stored);
  return ds;
}

inline void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string world = io::world_to_json(ds.world).dump();

  json traj_json = json{{"schema", "parkvio_trajectory"},
                        {"version", io::kSchemaVersion},
                        {"kind", ds.kind},
                        {"speed", ds.trajectory.speed},
                        {"arc_length", ds.trajectory.arc_length},
                        {"duration", ds.trajectory.duration}};
  json samples = json::array();
  for (const auto& s : ds.trajectory.samples)
    samples.push_back(json{{"t", s.t},
                           {"p", io::vec_to_json(Vec3(s.pose.t))},
                           {"q", io::quat_to_json(s.pose.q)},
                           {"v", io::vec_to_json(s.velocity)},
                           {"w", io::vec_to_json(s.angular_velocity)},
                           {"a", io::vec_to_json(s.acceleration)}});
  traj_json["samples"] = samples;
  const std::string trajectory = traj_json.dump();

  const std::string sensors = io::sensor_log_to_jsonl(ds.log);
  const std::string noise = io::noise_to_json(ds.noise).dump();

  io::write_file(dir / "world.json", world);
  io::write_file(dir / "trajectory.json", trajectory);
  io::write_file(dir / "sensors.jsonl", sensors);
  io::write_file(dir / "noise.json", noise);

  const json manifest{{"schema", "parkvio_dataset"},
                      {"version", io::kSchemaVersion},
                      {"kind", ds.kind},
                      {"seed", ds.seed},
                      {"files",
                       json{{"world", "world.json"},
                            {"trajectory", "trajectory.json"},
                            {"sensors", "sensors.jsonl"},
                            {"noise", "noise.json"}}},
                      {"checksums",
                       json{{"world.json", io::fnv1a(world)},
                            {"trajectory.json", io::fnv1a(trajectory)},
                            {"sensors.jsonl", io::fnv1a(sensors)},
                            {"noise.json", io::fnv1a(noise)}}}};
  io::write_file(dir / "manifest.json", manifest.dump(2));
}

inline Dataset load_dataset(const fs::path& dir) {
  const json manifest = json::parse(io::read_file(dir / "manifest.json"), nullptr, false);
  if (manifest.is_discarded()) throw DataError("corrupt manifest in " + dir.string());
  io::require_schema(manifest, "parkvio_dataset");

  Dataset ds;
  ds.kind = manifest.at("kind");
  ds.seed = manifest.at("seed");
  for (const auto& [name, sum] : manifest.at("checksums").items()) {
    const std::string content = io::read_file(dir / name);
    if (io::fnv1a(content) != sum.get<uint64_t>())
      throw DataError("checksum mismatch for " + name);
  }
  ds.world = io::world_from_json(json::parse(io::read_file(dir / "world.json")));
  ds.trajectory = io::trajectory_from_json(json::parse(io::read_file(dir / "trajectory.json")));
  ds.log = io::sensor_log_from_jsonl(io::read_file(dir / "sensors.jsonl"));
  ds.noise = io::noise_from_json(json::parse(io::read_file(dir / "noise.json")));
  return ds;
}

struct RunConfig {
  Method method = Method::kFull;
  uint64_t seed = 0;
  int keyframes = 10;     // sliding window K
  int features = 110;     // frontend budget N
  bool reweighting = true;
  std::optional<bool> ps_frontend;  // explicit overrides on top of the method
  std::optional<bool> ps_backend;
  std::optional<AssociationMode> association;
  double ps_weight_scale = 1.0;
  std::optional<double> ps_sigma;  // registration noise override, meters
};

// Factor weighting derived from the dataset's noise model with estimation
// floors so zero-noise logs stay numerically well-posed.
inline NoiseModel estimation_noise(const NoiseModel& sim) {
  NoiseModel n = sim;
  n.gyro_noise_density = std::max(n.gyro_noise_density, 1e-5);
  n.accel_noise_density = std::max(n.accel_noise_density, 1e-4);
  n.gyro_bias_walk = std::max(n.gyro_bias_walk, 2e-5);
  n.accel_bias_walk = std::max(n.accel_bias_walk, 2e-4);
  // WSS noise also absorbs scale error and the lever-arm approximation
  n.wss_noise_std = std::max(n.wss_noise_std, 1e-4) + 2.0 * n.wss_scale_error;
  return n;
}

inline EstimatorConfig make_estimator_config(const Dataset& ds, const RunConfig& run) {
  EstimatorConfig cfg;
  cfg.frontend.max_features = run.features;
  cfg.backend.window_size = run.keyframes;
  cfg.est_noise = estimation_noise(ds.noise);

  const double sigma_f = std::max(ds.noise.feature_pixel_noise_std, 1e-5);
  cfg.backend.reprojection_info = 1.0 / (sigma_f * sigma_f);
  // PS corner features carry metric BEV noise; weight them by the expected
  // noise ratio against natural features (nominal 4 m depth)
  const double sigma_corner = std::max(
      1e-5, (ds.noise.ps_corner_noise_base_std + 0.5 * ds.noise.ps_corner_noise_distance_gain) / 4.0);
  cfg.backend.ps_corner_info_scale =
      std::clamp((sigma_f / sigma_corner) * (sigma_f / sigma_corner), 0.02, 1.0);
  // incremental solves are warm-started; stop once progress stalls
  cfg.backend.cost_decrease_tol = 1e-4;
  cfg.backend.ps_sigma = run.ps_sigma.value_or(
      std::max(0.02, ds.noise.ps_corner_noise_base_std + 0.5 * ds.noise.ps_corner_noise_distance_gain));
  cfg.backend.ps_weight_scale = run.ps_weight_scale;
  cfg.backend.enable_reweighting = run.reweighting;

  switch (run.method) {
    case Method::kFull:
      break;
    case Method::kVinsStyle:
      cfg.backend.enable_ps_frontend = false;
      cfg.backend.enable_ps_backend = false;
      break;
    case Method::kFrontendPsOnly:
      cfg.backend.enable_ps_backend = false;
      break;
    case Method::kBackendPsOnly:
      cfg.backend.enable_ps_frontend = false;
      break;
    case Method::kHardMatchAssociation:
      cfg.association = AssociationMode::kHardMatch;
      break;
    case Method::kEkf:
      break;
  }
  if (run.ps_frontend.has_value()) cfg.backend.enable_ps_frontend = *run.ps_frontend;
  if (run.ps_backend.has_value()) cfg.backend.enable_ps_backend = *run.ps_backend;
  if (run.association.has_value()) cfg.association = *run.association;
  return cfg;
}

struct PipelineResult {
  EvalReport report;
  std::vector<TimedPose> odometry;
  std::vector<SolveReport> solves;
  std::vector<TrackHistoryRow> track_history;
  std::vector<AssociationRow> associations;
};

// Runs one method over one dataset in timestamp order and evaluates it
// against the stored ground truth.
inline PipelineResult run_pipeline(const Dataset& ds, const RunConfig& run) {
  if (ds.log.imu.size() != ds.log.wss.size())
    throw DataError("run_pipeline: IMU and WSS streams must share timestamps");
  PipelineResult out;
  out.report.method = to_string(run.method);
  out.report.trajectory_kind = ds.kind;
  out.report.seed = run.seed;
  out.report.trajectory_length = ds.trajectory.arc_length;
  out.report.config_echo = json{{"method", to_string(run.method)},
                                {"seed", run.seed},
                                {"keyframes", run.keyframes},
                                {"features", run.features},
                                {"reweighting", run.reweighting},
                                {"ps_weight_scale", run.ps_weight_scale},
                                {"dataset_seed", ds.seed},
                                {"dataset_kind", ds.kind}};

  const auto t0 = std::chrono::steady_clock::now();
  const auto initial = ds.trajectory.at(ds.trajectory.samples.front().t);

  if (run.method == Method::kEkf) {
    WheelImuEkf::Config config;
    const NoiseModel est = estimation_noise(ds.noise);
    config.sigma_gyro = est.gyro_noise_density;
    config.sigma_accel = est.accel_noise_density;
    config.sigma_bg_walk = est.gyro_bias_walk;
    config.sigma_ba_walk = est.accel_bias_walk;
    config.sigma_wss = std::max(est.wss_noise_std, 1e-3);
    try {
      out.odometry = run_ekf(ds.log, config, initial.pose.t, initial.velocity, initial.pose.q);
    } catch (const std::exception& e) {
      out.report.failed = true;
      out.report.failure = e.what();
    }
  } else {
    KeyframeState init;
    init.t = initial.t;
    init.p = initial.pose.t;
    init.v = initial.velocity;
    init.q = initial.pose.q;
    Estimator estimator(make_estimator_config(ds, run), ds.calib, init);
    auto result = estimator.process(ds.log);
    out.odometry = std::move(result.odometry);
    out.solves = std::move(result.reports);
    out.track_history = std::move(result.track_history);
    out.associations = std::move(result.associations);
    out.report.failed = result.failed;
    out.report.failure = result.failure;
    out.report.keyframes = result.keyframes;
    out.report.solves = static_cast<int>(out.solves.size());
    out.report.id_switches = count_id_switches(out.associations);
    out.report.duplicate_slots = result.duplicate_slots;
  }
  out.report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out.report.failed && !out.odometry.empty()) {
    const auto r = rmse(out.odometry, ds.trajectory);
    out.report.rmse = r.rmse;
    out.report.per_axis_rmse = r.per_axis;
    out.report.max_error = r.max_error;
  } else if (!out.report.failed) {
    out.report.failed = true;
    out.report.failure = "no odometry output";
  }
  return out;
}

inline void save_run(const PipelineResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_file(dir / "odometry.jsonl", io::odometry_to_jsonl(result.odometry));
  io::write_file(dir / "report.json", result.report.to_json().dump(2));
  io::write_file(dir / "solves.jsonl", io::reports_to_jsonl(result.solves));
  io::write_file(dir / "tracks.jsonl", io::tracks_to_jsonl(result.track_history));
}

}  // namespace parkvio
