#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/preint.hpp"
#include "parkvio/sensors.hpp"

#include <stdexcept>

namespace parkvio {

// Loosely-coupled IMU + WSS dead reckoning: multiplicative error-state EKF
// with a scalar wheel speed measurement and non-holonomic lateral/vertical
// pseudo-measurements (a scalar WSS alone leaves lateral drift unobservable).
// Error state (15): [dp, dv, dtheta, dbg, dba].
class WheelImuEkf {
 public:
  struct Config {
    double sigma_gyro = 2e-3;      // rad/s/sqrt(Hz)
    double sigma_accel = 2e-2;     // m/s^2/sqrt(Hz)
    double sigma_bg_walk = 1e-4;
    double sigma_ba_walk = 1e-3;
    double sigma_wss = 0.05;       // m/s
    double sigma_nonholonomic = 0.05;
  };

  WheelImuEkf(const Config& config, const Vec3& p0, const Vec3& v0, const Quat& q0)
      : config_(config), p_(p0), v_(v0), q_(q0.normalized()) {
    P_.setZero();
    P_.diagonal() << 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6,
        1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4;
  }

  void predict(const ImuSample& s0, const ImuSample& s1) {
    const double dt = s1.t - s0.t;
    if (dt <= 0) throw std::invalid_argument("ekf_predict: dt must be positive");

    const Vec3 w_hat = 0.5 * (s0.gyro + s1.gyro) - bg_;
    const Vec3 f0 = s0.accel - ba_;
    const Vec3 f1 = s1.accel - ba_;
    const Mat3 R0 = q_.toRotationMatrix();
    const Quat q1 = (q_ * exp_so3(w_hat * dt)).normalized();
    const Mat3 R1 = q1.toRotationMatrix();
    const Vec3 a_w = 0.5 * (R0 * f0 + R1 * f1) + gravity_world();

    const Mat3 phi_T = exp_so3(w_hat * dt).toRotationMatrix().transpose();
    const Mat3 jr_dt = right_jacobian_so3(w_hat * dt) * dt;
    const Mat3 da_dth = 0.5 * (-R0 * skew(f0) - R1 * skew(f1) * phi_T);
    const Mat3 da_dbg = 0.5 * (R1 * skew(f1) * jr_dt);
    const Mat3 da_dba = -0.5 * (R0 + R1);

    Eigen::Matrix<double, 15, 15> F = Eigen::Matrix<double, 15, 15>::Identity();
    F.block<3, 3>(0, 3) = dt * Mat3::Identity();
    F.block<3, 3>(0, 6) = 0.5 * dt * dt * da_dth;
    F.block<3, 3>(0, 9) = 0.5 * dt * dt * da_dbg;
    F.block<3, 3>(0, 12) = 0.5 * dt * dt * da_dba;
    F.block<3, 3>(3, 6) = dt * da_dth;
    F.block<3, 3>(3, 9) = dt * da_dbg;
    F.block<3, 3>(3, 12) = dt * da_dba;
    F.block<3, 3>(6, 6) = phi_T;
    F.block<3, 3>(6, 9) = -jr_dt;

    Eigen::Matrix<double, 15, 1> q_diag;
    const double sg2 = config_.sigma_gyro * config_.sigma_gyro / dt;
    const double sa2 = config_.sigma_accel * config_.sigma_accel / dt;
    const double qa = sa2 * dt * dt;
    const double qg = sg2 * dt * dt;
    q_diag << 0.25 * qa * dt * dt, 0.25 * qa * dt * dt, 0.25 * qa * dt * dt,
        qa, qa, qa, qg, qg, qg,
        config_.sigma_bg_walk * config_.sigma_bg_walk * dt,
        config_.sigma_bg_walk * config_.sigma_bg_walk * dt,
        config_.sigma_bg_walk * config_.sigma_bg_walk * dt,
        config_.sigma_ba_walk * config_.sigma_ba_walk * dt,
        config_.sigma_ba_walk * config_.sigma_ba_walk * dt,
        config_.sigma_ba_walk * config_.sigma_ba_walk * dt;

    P_ = F * P_ * F.transpose();
    P_ += q_diag.asDiagonal().toDenseMatrix();
    P_ = 0.5 * (P_ + P_.transpose()).eval();

    p_ += v_ * dt + 0.5 * a_w * dt * dt;
    v_ += a_w * dt;
    q_ = q1;
  }

  // Wheel speed: forward body velocity matches the measurement, lateral and
  // vertical body velocity softly constrained to zero.
  void update_wss(double wheel_speed) {
    const Mat3 R_T = q_.toRotationMatrix().transpose();
    const Vec3 v_body = R_T * v_;
    Vec3 innovation(wheel_speed - v_body.x(), -v_body.y(), -v_body.z());

    Eigen::Matrix<double, 3, 15> H = Eigen::Matrix<double, 3, 15>::Zero();
    H.block<3, 3>(0, 3) = R_T;
    H.block<3, 3>(0, 6) = skew(v_body);

    Eigen::Matrix<double, 3, 1> noise;
    noise << config_.sigma_wss * config_.sigma_wss,
        config_.sigma_nonholonomic * config_.sigma_nonholonomic,
        config_.sigma_nonholonomic * config_.sigma_nonholonomic;

    const Eigen::Matrix3d S = H * P_ * H.transpose() + noise.asDiagonal().toDenseMatrix();
    const Eigen::Matrix<double, 15, 3> K = P_ * H.transpose() * S.inverse();
    const Eigen::Matrix<double, 15, 1> dx = K * innovation;

    p_ += dx.segment<3>(0);
    v_ += dx.segment<3>(3);
    q_ = (q_ * exp_so3(dx.segment<3>(6))).normalized();
    bg_ += dx.segment<3>(9);
    ba_ += dx.segment<3>(12);

    const Eigen::Matrix<double, 15, 15> I_KH = Eigen::Matrix<double, 15, 15>::Identity() - K * H;
    P_ = I_KH * P_ * I_KH.transpose() + K * noise.asDiagonal().toDenseMatrix() * K.transpose();
    P_ = 0.5 * (P_ + P_.transpose()).eval();
  }

  const Vec3& position() const { return p_; }
  const Vec3& velocity() const { return v_; }
  const Quat& orientation() const { return q_; }
  const Eigen::Matrix<double, 15, 15>& covariance() const { return P_; }
  Pose pose() const { return Pose(q_, p_); }

 private:
  Config config_;
  Vec3 p_, v_;
  Quat q_;
  Vec3 bg_ = Vec3::Zero();
  Vec3 ba_ = Vec3::Zero();
  Eigen::Matrix<double, 15, 15> P_;
};

struct TimedPose {
  double t = 0;
  Pose pose;
};

// Runs the filter over a full log; one predict per IMU interval, one WSS
// update per sample. Emits the pose at every IMU timestamp.
inline std::vector<TimedPose> run_ekf(const SensorLog& log, const WheelImuEkf::Config& config,
                                      const Vec3& p0, const Vec3& v0, const Quat& q0) {
  if (log.imu.size() < 2) throw std::invalid_argument("run_ekf: empty IMU stream");
  WheelImuEkf ekf(config, p0, v0, q0);
  std::vector<TimedPose> out;
  out.push_back({log.imu.front().t, ekf.pose()});
  size_t wss_idx = 0;
  for (size_t i = 0; i + 1 < log.imu.size(); ++i) {
    ekf.predict(log.imu[i], log.imu[i + 1]);
    const double t = log.imu[i + 1].t;
    while (wss_idx < log.wss.size() && log.wss[wss_idx].t <= t + 1e-9) {
      if (std::abs(log.wss[wss_idx].t - t) < 1e-9) ekf.update_wss(log.wss[wss_idx].speed);
      ++wss_idx;
    }
    out.push_back({t, ekf.pose()});
  }
  return out;
}

}  // namespace parkvio
