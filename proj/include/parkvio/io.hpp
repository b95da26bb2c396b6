#pragma once

#include "parkvio/ekf.hpp"
#include "parkvio/estimator.hpp"
#include "parkvio/sensors.hpp"
#include "parkvio/trajectory.hpp"
#include "parkvio/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace parkvio {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Thrown for unreadable, mismatched or corrupt data files (CLI exit code 2).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

namespace io {

constexpr int kSchemaVersion = 1;

inline void require_schema(const json& j, const std::string& name) {
  if (!j.is_object() || j.value("schema", "") != name ||
      j.value("version", -1) != kSchemaVersion)
    throw DataError("schema mismatch: expected " + name + " v" + std::to_string(kSchemaVersion));
}

inline uint64_t fnv1a(const std::string& data) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

// --- basic value encodings -------------------------------------------------

inline json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json vec_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
inline Vec3 vec3_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }
inline Vec2 vec2_from_json(const json& j) { return Vec2(j.at(0), j.at(1)); }

// quaternions serialize scalar-first [w, x, y, z]
inline json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }
inline Quat quat_from_json(const json& j) { return Quat(j.at(0), j.at(1), j.at(2), j.at(3)); }

inline json pose_to_json(const Pose& p) { return json{{"q", quat_to_json(p.q)}, {"t", vec_to_json(p.t)}}; }
inline Pose pose_from_json(const json& j) { return Pose(quat_from_json(j.at("q")), vec3_from_json(j.at("t"))); }

inline const char* occupancy_name(Occupancy o) { return o == Occupancy::kOccupied ? "occupied" : "vacant"; }
inline Occupancy occupancy_from(const std::string& s) {
  if (s == "occupied") return Occupancy::kOccupied;
  if (s == "vacant") return Occupancy::kVacant;
  throw DataError("bad occupancy value: " + s);
}

// --- world -----------------------------------------------------------------

inline json world_to_json(const ParkingLotWorld& world) {
  json slots = json::array();
  for (const auto& s : world.slots)
    slots.push_back(json{{"id", s.id},
                         {"center", vec_to_json(s.center)},
                         {"heading", s.heading},
                         {"width", s.width},
                         {"depth", s.depth},
                         {"occupancy", occupancy_name(s.occupancy)}});
  json landmarks = json::array();
  for (const auto& l : world.landmarks)
    landmarks.push_back(json{{"id", l.id}, {"p", vec_to_json(l.position)}});
  return json{{"schema", "parkvio_world"},
              {"version", kSchemaVersion},
              {"spec",
               json{{"width", world.spec.width},
                    {"height", world.spec.height},
                    {"slot_count", world.spec.slot_count},
                    {"slot_width", world.spec.slot_width},
                    {"slot_depth", world.spec.slot_depth},
                    {"aisle_width", world.spec.aisle_width},
                    {"occupied_fraction", world.spec.occupied_fraction},
                    {"landmark_count", world.spec.landmark_count},
                    {"wall_height", world.spec.wall_height}}},
              {"aisle_centers", world.aisle_centers},
              {"slots", slots},
              {"landmarks", landmarks}};
}

inline ParkingLotWorld world_from_json(const json& j) {
  require_schema(j, "parkvio_world");
  ParkingLotWorld world;
  const auto& s = j.at("spec");
  world.spec.width = s.at("width");
  world.spec.height = s.at("height");
  world.spec.slot_count = s.at("slot_count");
  world.spec.slot_width = s.at("slot_width");
  world.spec.slot_depth = s.at("slot_depth");
  world.spec.aisle_width = s.at("aisle_width");
  world.spec.occupied_fraction = s.at("occupied_fraction");
  world.spec.landmark_count = s.at("landmark_count");
  world.spec.wall_height = s.at("wall_height");
  world.aisle_centers = j.at("aisle_centers").get<std::vector<double>>();
  for (const auto& js : j.at("slots")) {
    ParkingSlot slot;
    slot.id = js.at("id");
    slot.center = vec2_from_json(js.at("center"));
    slot.heading = js.at("heading");
    slot.width = js.at("width");
    slot.depth = js.at("depth");
    slot.occupancy = occupancy_from(js.at("occupancy"));
    world.slots.push_back(slot);
  }
  for (const auto& jl : j.at("landmarks"))
    world.landmarks.push_back({jl.at("id"), vec3_from_json(jl.at("p"))});
  return world;
}

// --- trajectory ------------------------------------------------------------

inline json trajectory_to_json(const GroundTruthTrajectory& traj) {
  json samples = json::array();
  for (const auto& s : traj.sampled())
    samples.push_back(json{{"t", s.t},
                           {"p", vec_to_json(Vec3(s.pose.t))},
                           {"q", quat_to_json(s.pose.q)},
                           {"v", vec_to_json(s.velocity)},
                           {"w", vec_to_json(s.angular_velocity)},
                           {"a", vec_to_json(s.acceleration)}});
  return json{{"schema", "parkvio_trajectory"},
              {"version", kSchemaVersion},
              {"kind", to_string(traj.kind())},
              {"speed", traj.speed()},
              {"arc_length", traj.arc_length()},
              {"duration", traj.duration()},
              {"samples", samples}};
}

struct StoredTrajectory {
  TrajectoryKind kind = TrajectoryKind::kStraight0;
  double speed = 0;
  double arc_length = 0;
  double duration = 0;
  std::vector<TrajectorySample> samples;

  TrajectorySample at(double t) const {
    if (samples.empty()) throw DataError("empty trajectory");
    t = std::clamp(t, samples.front().t, samples.back().t);
    const auto upper = std::upper_bound(samples.begin(), samples.end(), t,
                                        [](double v, const TrajectorySample& s) { return v < s.t; });
    if (upper == samples.begin()) return samples.front();
    if (upper == samples.end()) return samples.back();
    const auto& b = *upper;
    const auto& a = *(upper - 1);
    const double u = (t - a.t) / std::max(1e-12, b.t - a.t);
    TrajectorySample out;
    out.t = t;
    out.pose.t = (1 - u) * a.pose.t + u * b.pose.t;
    out.pose.q = a.pose.q.slerp(u, b.pose.q);
    out.velocity = (1 - u) * a.velocity + u * b.velocity;
    out.angular_velocity = (1 - u) * a.angular_velocity + u * b.angular_velocity;
    out.acceleration = (1 - u) * a.acceleration + u * b.acceleration;
    return out;
  }
};

inline StoredTrajectory trajectory_from_json(const json& j) {
  require_schema(j, "parkvio_trajectory");
  StoredTrajectory traj;
  traj.kind = trajectory_kind_from_string(j.at("kind"));
  traj.speed = j.at("speed");
  traj.arc_length = j.at("arc_length");
  traj.duration = j.at("duration");
  for (const auto& js : j.at("samples")) {
    TrajectorySample s;
    s.t = js.at("t");
    s.pose = Pose(quat_from_json(js.at("q")), vec3_from_json(js.at("p")));
    s.velocity = vec3_from_json(js.at("v"));
    s.angular_velocity = vec3_from_json(js.at("w"));
    s.acceleration = vec3_from_json(js.at("a"));
    traj.samples.push_back(s);
  }
  return traj;
}

// --- noise model -----------------------------------------------------------

inline json noise_to_json(const NoiseModel& n) {
  return json{{"schema", "parkvio_noise"},
              {"version", kSchemaVersion},
              {"gyro_noise_density", n.gyro_noise_density},
              {"accel_noise_density", n.accel_noise_density},
              {"gyro_bias", n.gyro_bias},
              {"accel_bias", n.accel_bias},
              {"gyro_bias_walk", n.gyro_bias_walk},
              {"accel_bias_walk", n.accel_bias_walk},
              {"wss_noise_std", n.wss_noise_std},
              {"wss_scale_error", n.wss_scale_error},
              {"feature_pixel_noise_std", n.feature_pixel_noise_std},
              {"feature_dropout_rate", n.feature_dropout_rate},
              {"ps_corner_noise_base_std", n.ps_corner_noise_base_std},
              {"ps_corner_noise_distance_gain", n.ps_corner_noise_distance_gain},
              {"ps_false_positive_rate", n.ps_false_positive_rate},
              {"ps_miss_rate", n.ps_miss_rate},
              {"ps_occupancy_flip_rate", n.ps_occupancy_flip_rate},
              {"ps_confidence_slope", n.ps_confidence_slope},
              {"ps_confidence_std", n.ps_confidence_std}};
}

inline NoiseModel noise_from_json(const json& j) {
  require_schema(j, "parkvio_noise");
  NoiseModel n;
  n.gyro_noise_density = j.at("gyro_noise_density");
  n.accel_noise_density = j.at("accel_noise_density");
  n.gyro_bias = j.at("gyro_bias");
  n.accel_bias = j.at("accel_bias");
  n.gyro_bias_walk = j.at("gyro_bias_walk");
  n.accel_bias_walk = j.at("accel_bias_walk");
  n.wss_noise_std = j.at("wss_noise_std");
  n.wss_scale_error = j.at("wss_scale_error");
  n.feature_pixel_noise_std = j.at("feature_pixel_noise_std");
  n.feature_dropout_rate = j.at("feature_dropout_rate");
  n.ps_corner_noise_base_std = j.at("ps_corner_noise_base_std");
  n.ps_corner_noise_distance_gain = j.at("ps_corner_noise_distance_gain");
  n.ps_false_positive_rate = j.at("ps_false_positive_rate");
  n.ps_miss_rate = j.at("ps_miss_rate");
  n.ps_occupancy_flip_rate = j.at("ps_occupancy_flip_rate");
  n.ps_confidence_slope = j.at("ps_confidence_slope");
  n.ps_confidence_std = j.at("ps_confidence_std");
  n.validate();
  return n;
}

// --- sensor log (JSON-lines, one record per sensor event) -------------------

inline std::string sensor_log_to_jsonl(const SensorLog& log) {
  std::ostringstream out;
  out << json{{"schema", "parkvio_sensor_log"},
              {"version", kSchemaVersion},
              {"imu_hz", log.rates.imu_hz},
              {"camera_hz", log.rates.camera_hz},
              {"bev_hz", log.rates.bev_hz}}
             .dump()
      << "\n";
  // merge streams in time order, stable by kind: imu, wss, frame, bev
  size_t ii = 0, wi = 0, fi = 0, bi = 0;
  const auto next_time = [&]() {
    double t = std::numeric_limits<double>::infinity();
    if (ii < log.imu.size()) t = std::min(t, log.imu[ii].t);
    if (wi < log.wss.size()) t = std::min(t, log.wss[wi].t);
    if (fi < log.frames.size()) t = std::min(t, log.frames[fi].t);
    if (bi < log.bev.size()) t = std::min(t, log.bev[bi].t);
    return t;
  };
  while (true) {
    const double t = next_time();
    if (!std::isfinite(t)) break;
    if (ii < log.imu.size() && log.imu[ii].t <= t + 1e-12) {
      const auto& s = log.imu[ii++];
      out << json{{"t", s.t}, {"kind", "imu"},
                  {"payload", json{{"gyro", vec_to_json(s.gyro)}, {"accel", vec_to_json(s.accel)}}}}
                 .dump()
          << "\n";
      continue;
    }
    if (wi < log.wss.size() && log.wss[wi].t <= t + 1e-12) {
      const auto& s = log.wss[wi++];
      out << json{{"t", s.t}, {"kind", "wss"}, {"payload", json{{"speed", s.speed}}}}.dump() << "\n";
      continue;
    }
    if (fi < log.frames.size() && log.frames[fi].t <= t + 1e-12) {
      const auto& s = log.frames[fi++];
      json feats = json::array();
      for (const auto& f : s.features)
        feats.push_back(json::array({f.landmark_id, f.uv.x(), f.uv.y()}));
      out << json{{"t", s.t}, {"kind", "frame"}, {"payload", json{{"features", feats}}}}.dump()
          << "\n";
      continue;
    }
    const auto& s = log.bev[bi++];
    json dets = json::array();
    for (const auto& d : s.detections) {
      json cpx = json::array(), cb = json::array();
      for (int c = 0; c < 4; ++c) {
        cpx.push_back(vec_to_json(d.corners_px[c]));
        cb.push_back(vec_to_json(d.corners_body[c]));
      }
      dets.push_back(json{{"corners_px", cpx},
                          {"corners_body", cb},
                          {"occupancy", occupancy_name(d.occupancy)},
                          {"confidence", d.confidence},
                          {"gt_slot_id", d.gt_slot_id}});
    }
    out << json{{"t", s.t}, {"kind", "bev"}, {"payload", json{{"detections", dets}}}}.dump()
        << "\n";
  }
  return out.str();
}

inline SensorLog sensor_log_from_jsonl(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty sensor log");
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) throw DataError("bad sensor log header");
  require_schema(header, "parkvio_sensor_log");

  SensorLog log;
  log.rates.imu_hz = header.at("imu_hz");
  log.rates.camera_hz = header.at("camera_hz");
  log.rates.bev_hz = header.at("bev_hz");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("bad sensor log record");
    const std::string kind = j.at("kind");
    const double t = j.at("t");
    const json& payload = j.at("payload");
    if (kind == "imu") {
      log.imu.push_back({t, vec3_from_json(payload.at("gyro")), vec3_from_json(payload.at("accel"))});
    } else if (kind == "wss") {
      log.wss.push_back({t, payload.at("speed")});
    } else if (kind == "frame") {
      CameraFrame f;
      f.t = t;
      for (const auto& jf : payload.at("features"))
        f.features.push_back({jf.at(0), Vec2(jf.at(1), jf.at(2))});
      log.frames.push_back(std::move(f));
    } else if (kind == "bev") {
      BevFrame b;
      b.t = t;
      for (const auto& jd : payload.at("detections")) {
        SlotObservation d;
        d.t = t;
        for (int c = 0; c < 4; ++c) {
          d.corners_px[c] = vec2_from_json(jd.at("corners_px").at(c));
          d.corners_body[c] = vec2_from_json(jd.at("corners_body").at(c));
        }
        d.occupancy = occupancy_from(jd.at("occupancy"));
        d.confidence = jd.at("confidence");
        d.gt_slot_id = jd.at("gt_slot_id");
        b.detections.push_back(d);
      }
      log.bev.push_back(std::move(b));
    } else {
      throw DataError("unknown sensor record kind: " + kind);
    }
  }
  return log;
}

// --- odometry stream ---------------------------------------------------------

inline std::string odometry_to_jsonl(const std::vector<TimedPose>& poses) {
  std::ostringstream out;
  out << json{{"schema", "parkvio_odometry"}, {"version", kSchemaVersion}}.dump() << "\n";
  for (const auto& tp : poses)
    out << json{{"t", tp.t}, {"p", vec_to_json(tp.pose.t)}, {"q", quat_to_json(tp.pose.q)}}.dump()
        << "\n";
  return out.str();
}

inline std::vector<TimedPose> odometry_from_jsonl(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty odometry stream");
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) throw DataError("bad odometry header");
  require_schema(header, "parkvio_odometry");
  std::vector<TimedPose> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back({j.at("t"), Pose(quat_from_json(j.at("q")), vec3_from_json(j.at("p")))});
  }
  return out;
}

// --- track history -----------------------------------------------------------

inline std::string tracks_to_jsonl(const std::vector<TrackHistoryRow>& rows) {
  std::ostringstream out;
  out << json{{"schema", "parkvio_tracks"}, {"version", kSchemaVersion}}.dump() << "\n";
  for (const auto& r : rows) {
    json corners = json::array();
    for (const auto& c : r.corners_world) corners.push_back(vec_to_json(c));
    const char* status = r.status == TrackStatus::kConfirmed
                             ? "confirmed"
                             : (r.status == TrackStatus::kLost ? "lost" : "tentative");
    out << json{{"t", r.t},
                {"id", r.id},
                {"gt_slot_id", r.gt_slot_id},
                {"corners_world", corners},
                {"occupancy", occupancy_name(r.occupancy)},
                {"status", status}}
               .dump()
        << "\n";
  }
  return out.str();
}

// --- solver reports ----------------------------------------------------------

inline std::string reports_to_jsonl(const std::vector<SolveReport>& reports) {
  std::ostringstream out;
  out << json{{"schema", "parkvio_solves"}, {"version", kSchemaVersion}}.dump() << "\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << json{{"solve", i},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"reason", r.convergence},
                {"initial", json{{"visual", r.initial_cost.visual},
                                 {"inertial", r.initial_cost.inertial},
                                 {"ps", r.initial_cost.ps},
                                 {"prior", r.initial_cost.prior}}},
                {"final", json{{"visual", r.final_cost.visual},
                               {"inertial", r.final_cost.inertial},
                               {"ps", r.final_cost.ps},
                               {"prior", r.final_cost.prior}}}}
               .dump()
        << "\n";
  }
  return out.str();
}

}  // namespace io
}  // namespace parkvio
