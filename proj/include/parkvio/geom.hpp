#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

namespace parkvio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Quaternion exponential of a rotation vector (Hamilton convention).
inline Quat exp_so3(const Vec3& theta) {
  const double angle = theta.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * theta.x(), 0.5 * theta.y(), 0.5 * theta.z());
    q.normalize();
    return q;
  }
  const Vec3 axis = theta / angle;
  return Quat(Eigen::AngleAxisd(angle, axis));
}

inline Vec3 log_so3(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  if (vn < 1e-12) return 2.0 * q.vec();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return q.vec() * (angle / vn);
}

// Right Jacobian of SO(3): Exp(theta + d) ~ Exp(theta) Exp(Jr(theta) d).
inline Mat3 right_jacobian_so3(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 W = skew(theta);
  if (angle < 1e-8) {
    return Mat3::Identity() - 0.5 * W + W * W / 6.0;
  }
  const double a2 = angle * angle;
  return Mat3::Identity() - W * (1.0 - std::cos(angle)) / a2 +
         W * W * (angle - std::sin(angle)) / (a2 * angle);
}

// Rigid transform on SE(3). The quaternion maps the local frame into the
// parent frame (p_parent = q * p_local + t). Serialized scalar-first
// [w, x, y, z].
struct Pose {
  Quat q{1, 0, 0, 0};
  Vec3 t{0, 0, 0};

  Pose() = default;
  Pose(const Quat& q_in, const Vec3& t_in) : q(q_in.normalized()), t(t_in) {}

  static Pose identity() { return Pose(); }

  static Pose from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    return Pose(Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), t);
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  Vec3 apply(const Vec3& p) const { return q * p + t; }

  Pose inverse() const {
    const Quat qi = q.conjugate();
    return Pose(qi, -(qi * t));
  }
};

// Applies b then a.
inline Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.q * b.q, a.q * b.t + a.t);
}

inline Vec3 body_to_world(const Vec3& p_body, const Pose& pose) {
  return pose.apply(p_body);
}

inline Vec3 world_to_body(const Vec3& p_world, const Pose& pose) {
  return pose.q.conjugate() * (p_world - pose.t);
}

inline double yaw_of(const Quat& q) {
  const Mat3 R = q.toRotationMatrix();
  return std::atan2(R(1, 0), R(0, 0));
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// BEV image <-> vehicle body plane mapping.
//
// Axis convention (fixed): body +x forward, +y left, +z up; BEV pixel
// (0, 0) is the top-left corner, u grows rightward, v grows downward, and
// the vehicle points "up" in the image. The image center pixel is the body
// origin. A front camera extrinsic rides along for reprojecting slot
// corners into the front view.
struct BevCalibration {
  int image_size = 576;       // pixels, square
  double coverage_m = 11.32;  // meters covered by the full image width
  Pose cam_in_body;           // T_bc: front camera frame -> body frame

  BevCalibration() : cam_in_body(default_front_camera()) {}
  BevCalibration(int size, double coverage, const Pose& cam)
      : image_size(size), coverage_m(coverage), cam_in_body(cam) {
    if (image_size <= 0 || coverage_m <= 0.0)
      throw std::invalid_argument("BevCalibration: size and coverage must be positive");
  }

  // Camera optical axis along body +x, x right (-y body), y down (-z body),
  // mounted 2.0 m ahead of the body origin at 1.2 m height.
  static Pose default_front_camera() {
    Mat3 R;
    R.col(0) = Vec3(0, -1, 0);
    R.col(1) = Vec3(0, 0, -1);
    R.col(2) = Vec3(1, 0, 0);
    return Pose(Quat(R), Vec3(2.0, 0.0, 1.2));
  }

  double meters_per_pixel() const { return coverage_m / image_size; }

  bool in_bounds(const Vec2& px) const {
    return px.x() >= 0.0 && px.x() <= image_size && px.y() >= 0.0 && px.y() <= image_size;
  }

  Vec2 bev_to_body(const Vec2& px) const {
    if (!in_bounds(px))
      throw std::out_of_range("bev_to_body: pixel outside image bounds");
    return bev_to_body_affine(px);
  }

  // Unchecked affine map. Detector outputs extrapolate slot rectangles past
  // the image edge, so their corner pixels may legally fall out of bounds.
  Vec2 bev_to_body_affine(const Vec2& px) const {
    const double c = 0.5 * image_size;
    const double mpp = meters_per_pixel();
    return Vec2((c - px.y()) * mpp, (c - px.x()) * mpp);
  }

  Vec2 body_to_bev(const Vec2& p) const {
    const double c = 0.5 * image_size;
    const double mpp = meters_per_pixel();
    return Vec2(c - p.y() / mpp, c - p.x() / mpp);
  }

  bool body_point_in_coverage(const Vec2& p) const {
    const double half = 0.5 * coverage_m;
    return std::abs(p.x()) <= half && std::abs(p.y()) <= half;
  }

  // Pixel distance from the BEV center divided by half the image size,
  // in [0, sqrt(2)] inside the image.
  double normalized_center_distance(const Vec2& px) const {
    const double c = 0.5 * image_size;
    return (px - Vec2(c, c)).norm() / c;
  }
};

// Normalized-plane pinhole front camera. Points are expressed in the body
// frame; visibility is a symmetric frustum gate.
struct FrontCamera {
  Pose cam_in_body = BevCalibration::default_front_camera();
  double min_depth = 0.5;
  double max_depth = 20.0;
  double tan_half_fov_h = 2.4;  // fisheye-like, ~135 deg horizontal
  double tan_half_fov_v = 2.5;  // wide vertical gate, admits near ground points

  Vec3 to_camera(const Vec3& p_body) const {
    return world_to_body(p_body, cam_in_body);
  }

  bool visible(const Vec3& p_body) const {
    const Vec3 pc = to_camera(p_body);
    if (pc.z() < min_depth || pc.z() > max_depth) return false;
    return std::abs(pc.x()) <= tan_half_fov_h * pc.z() &&
           std::abs(pc.y()) <= tan_half_fov_v * pc.z();
  }

  // Normalized image coordinates; throws if the point is at or behind the
  // optical center plane.
  Vec2 project(const Vec3& p_body) const {
    const Vec3 pc = to_camera(p_body);
    if (pc.z() <= 1e-9)
      throw std::domain_error("FrontCamera::project: point behind camera");
    return Vec2(pc.x() / pc.z(), pc.y() / pc.z());
  }
};

}  // namespace parkvio
