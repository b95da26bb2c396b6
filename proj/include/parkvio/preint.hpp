#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/sensors.hpp"

#include <vector>

namespace parkvio {

struct ImuBias {
  Vec3 gyro{0, 0, 0};
  Vec3 accel{0, 0, 0};

  bool finite() const { return gyro.allFinite() && accel.allFinite(); }
};

// Residual / error-state ordering for one preintegrated link:
//   [dtheta(3), dv(3), dp(3), dbg(3), dba(3), dp_wss(3)]
constexpr int kPreintDim = 18;
constexpr int kIdxTheta = 0;
constexpr int kIdxVel = 3;
constexpr int kIdxPos = 6;
constexpr int kIdxBg = 9;
constexpr int kIdxBa = 12;
constexpr int kIdxWss = 15;

using Mat18 = Eigen::Matrix<double, kPreintDim, kPreintDim>;

// Relative-motion aggregate between two keyframes: IMU deltas, the
// WSS-integrated body-frame displacement, first-order bias sensitivities of
// (delta_q, delta_v, delta_p), and the 18x18 noise covariance. Immutable
// after integration; bias_correct returns an adjusted copy.
struct PreintegratedMotion {
  double dt_total = 0;
  Quat delta_q{1, 0, 0, 0};
  Vec3 delta_v{0, 0, 0};
  Vec3 delta_p{0, 0, 0};
  Vec3 delta_p_wss{0, 0, 0};
  Mat18 covariance = Mat18::Zero();

  Mat3 j_q_bg = Mat3::Zero();
  Mat3 j_v_bg = Mat3::Zero();
  Mat3 j_v_ba = Mat3::Zero();
  Mat3 j_p_bg = Mat3::Zero();
  Mat3 j_p_ba = Mat3::Zero();

  ImuBias linearization_bias;
};

namespace detail {

struct PreintState {
  Quat q{1, 0, 0, 0};
  Vec3 v{0, 0, 0};
  Vec3 p{0, 0, 0};
  Vec3 pw{0, 0, 0};
  Mat18 P = Mat18::Zero();
  Eigen::Matrix<double, 9, 6> J = Eigen::Matrix<double, 9, 6>::Zero();  // (q,v,p) x (bg,ba)
};

// One midpoint step. Propagates the state, the bias Jacobian and the
// covariance with the exact linearization of the discrete step map.
inline void preint_step(PreintState& s, const ImuSample& s0, const ImuSample& s1, double wss_mid,
                        const ImuBias& bias, const NoiseModel& noise, double dt,
                        bool propagate_cov) {
  const Vec3 w_hat = 0.5 * (s0.gyro + s1.gyro) - bias.gyro;
  const Vec3 f0 = s0.accel - bias.accel;
  const Vec3 f1 = s1.accel - bias.accel;

  const Mat3 R0 = s.q.toRotationMatrix();
  const Quat q1 = (s.q * exp_so3(w_hat * dt)).normalized();
  const Mat3 R1 = q1.toRotationMatrix();
  const Vec3 a_mid = 0.5 * (R0 * f0 + R1 * f1);

  const Mat3 phi_T = exp_so3(w_hat * dt).toRotationMatrix().transpose();
  const Mat3 jr_dt = right_jacobian_so3(w_hat * dt) * dt;

  // exact first-order sensitivities of the step map
  const Mat3 da_dth = 0.5 * (-R0 * skew(f0) - R1 * skew(f1) * phi_T);
  const Mat3 da_dbg = 0.5 * (R1 * skew(f1) * jr_dt);  // via dtheta' = -jr_dt dbg
  const Mat3 da_dba = -0.5 * (R0 + R1);

  Eigen::Matrix<double, 9, 9> F9 = Eigen::Matrix<double, 9, 9>::Identity();
  F9.block<3, 3>(0, 0) = phi_T;
  F9.block<3, 3>(3, 0) = dt * da_dth;
  F9.block<3, 3>(6, 0) = 0.5 * dt * dt * da_dth;
  F9.block<3, 3>(6, 3) = dt * Mat3::Identity();
  Eigen::Matrix<double, 9, 6> B9 = Eigen::Matrix<double, 9, 6>::Zero();
  B9.block<3, 3>(0, 0) = -jr_dt;
  B9.block<3, 3>(3, 0) = dt * da_dbg;
  B9.block<3, 3>(3, 3) = dt * da_dba;
  B9.block<3, 3>(6, 0) = 0.5 * dt * dt * da_dbg;
  B9.block<3, 3>(6, 3) = 0.5 * dt * dt * da_dba;

  s.J = F9 * s.J + B9;

  if (propagate_cov) {
    // WSS displacement rides the half-step rotation
    const Quat q_half = (s.q * exp_so3(0.5 * w_hat * dt)).normalized();
    const Mat3 R_half = q_half.toRotationMatrix();
    const Vec3 u(wss_mid, 0, 0);
    const Mat3 jr_half = right_jacobian_so3(0.5 * w_hat * dt);

    Mat18 F = Mat18::Identity();
    F.block<9, 9>(0, 0) = F9;
    F.block<9, 6>(0, kIdxBg) = B9;  // bias error enters like a bias perturbation
    F.block<3, 3>(kIdxWss, kIdxTheta) = -dt * R0 * skew((R0.transpose() * R_half) * u);
    F.block<3, 3>(kIdxWss, kIdxBg) = 0.5 * dt * dt * R_half * skew(u) * jr_half;

    // noise inputs: [ng0, na0, ng1, na1, nbg_walk, nba_walk, n_wss]
    Eigen::Matrix<double, kPreintDim, 19> V = Eigen::Matrix<double, kPreintDim, 19>::Zero();
    const Mat3 dth_dng = 0.5 * jr_dt;  // measurement noise on either gyro sample
    V.block<3, 3>(kIdxTheta, 0) = dth_dng;
    V.block<3, 3>(kIdxTheta, 6) = dth_dng;
    const Mat3 da_dng = -0.5 * (R1 * skew(f1) * dth_dng);
    V.block<3, 3>(kIdxVel, 0) = dt * da_dng;
    V.block<3, 3>(kIdxVel, 6) = dt * da_dng;
    V.block<3, 3>(kIdxVel, 3) = dt * 0.5 * R0;
    V.block<3, 3>(kIdxVel, 9) = dt * 0.5 * R1;
    V.block<3, 3>(kIdxPos, 0) = 0.5 * dt * dt * da_dng;
    V.block<3, 3>(kIdxPos, 6) = 0.5 * dt * dt * da_dng;
    V.block<3, 3>(kIdxPos, 3) = 0.5 * dt * dt * 0.5 * R0;
    V.block<3, 3>(kIdxPos, 9) = 0.5 * dt * dt * 0.5 * R1;
    V.block<3, 3>(kIdxBg, 12) = Mat3::Identity();
    V.block<3, 3>(kIdxBa, 15) = Mat3::Identity();
    V.block<3, 1>(kIdxWss, 18) = dt * R_half.col(0);

    Eigen::Matrix<double, 19, 1> q_diag;
    const double sg2 = noise.gyro_noise_density * noise.gyro_noise_density / dt;
    const double sa2 = noise.accel_noise_density * noise.accel_noise_density / dt;
    const double sbg2 = noise.gyro_bias_walk * noise.gyro_bias_walk * dt;
    const double sba2 = noise.accel_bias_walk * noise.accel_bias_walk * dt;
    const double sw2 = noise.wss_noise_std * noise.wss_noise_std;
    q_diag << sg2, sg2, sg2, sa2, sa2, sa2, sg2, sg2, sg2, sa2, sa2, sa2,
        sbg2, sbg2, sbg2, sba2, sba2, sba2, sw2;

    s.P = F * s.P * F.transpose() + V * q_diag.asDiagonal() * V.transpose();
    s.P = 0.5 * (s.P + s.P.transpose()).eval();

    s.pw += dt * (R_half * u);
  } else {
    const Quat q_half = (s.q * exp_so3(0.5 * w_hat * dt)).normalized();
    s.pw += dt * (q_half * Vec3(wss_mid, 0, 0));
  }

  s.p += s.v * dt + 0.5 * a_mid * dt * dt;
  s.v += a_mid * dt;
  s.q = q1;
}

}  // namespace detail

// Pre-integrates IMU and WSS streams over one keyframe interval with the
// midpoint rule. Streams must share the interval; WSS samples are matched
// to IMU timestamps (the simulator emits them on the same clock).
inline PreintegratedMotion integrate(const std::vector<ImuSample>& imu,
                                     const std::vector<WssSample>& wss, const ImuBias& bias,
                                     const NoiseModel& noise, bool propagate_cov = true) {
  if (imu.size() < 2) throw std::invalid_argument("integrate: need at least 2 IMU samples");
  if (wss.size() != imu.size())
    throw std::invalid_argument("integrate: WSS and IMU streams must be sampled together");
  if (!bias.finite()) throw std::invalid_argument("integrate: non-finite bias");
  for (size_t i = 0; i < imu.size(); ++i) {
    if (!imu[i].gyro.allFinite() || !imu[i].accel.allFinite() || !std::isfinite(wss[i].speed))
      throw std::invalid_argument("integrate: non-finite sample");
    if (i > 0 && imu[i].t <= imu[i - 1].t)
      throw std::invalid_argument("integrate: IMU samples must be strictly time-ordered");
    if (std::abs(wss[i].t - imu[i].t) > 1e-9)
      throw std::invalid_argument("integrate: WSS timestamps must match IMU timestamps");
  }

  detail::PreintState s;
  for (size_t i = 0; i + 1 < imu.size(); ++i) {
    const double dt = imu[i + 1].t - imu[i].t;
    const double wss_mid = 0.5 * (wss[i].speed + wss[i + 1].speed);
    detail::preint_step(s, imu[i], imu[i + 1], wss_mid, bias, noise, dt, propagate_cov);
  }

  PreintegratedMotion out;
  out.dt_total = imu.back().t - imu.front().t;
  out.delta_q = s.q;
  out.delta_v = s.v;
  out.delta_p = s.p;
  out.delta_p_wss = s.pw;
  out.covariance = s.P;
  out.j_q_bg = s.J.block<3, 3>(0, 0);
  out.j_v_bg = s.J.block<3, 3>(3, 0);
  out.j_v_ba = s.J.block<3, 3>(3, 3);
  out.j_p_bg = s.J.block<3, 3>(6, 0);
  out.j_p_ba = s.J.block<3, 3>(6, 3);
  out.linearization_bias = bias;
  return out;
}

// First-order bias update via the stored Jacobians, no re-integration.
// delta_p_wss carries no bias sensitivity by construction (its gyro-bias
// coupling is second order at parking yaw rates and is covered by the WSS
// noise block).
inline PreintegratedMotion bias_correct(const PreintegratedMotion& m, const ImuBias& new_bias) {
  const Vec3 dbg = new_bias.gyro - m.linearization_bias.gyro;
  const Vec3 dba = new_bias.accel - m.linearization_bias.accel;
  PreintegratedMotion out = m;
  out.delta_q = (m.delta_q * exp_so3(m.j_q_bg * dbg)).normalized();
  out.delta_v = m.delta_v + m.j_v_bg * dbg + m.j_v_ba * dba;
  out.delta_p = m.delta_p + m.j_p_bg * dbg + m.j_p_ba * dba;
  out.linearization_bias = new_bias;
  return out;
}

}  // namespace parkvio
