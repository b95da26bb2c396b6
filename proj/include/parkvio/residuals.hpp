#pragma once

#include "parkvio/geom.hpp"
#include "parkvio/preint.hpp"

#include <string>
#include <vector>

namespace parkvio {

// Per-keyframe optimization state. Error-state block layout (15):
//   [dp(3), dtheta(3), dv(3), dbg(3), dba(3)]
// with q boxplus q*Exp(dtheta).
struct KeyframeState {
  double t = 0;
  Vec3 p{0, 0, 0};
  Vec3 v{0, 0, 0};
  Quat q{1, 0, 0, 0};
  ImuBias bias;

  void boxplus(const Eigen::Matrix<double, 15, 1>& dx) {
    p += dx.segment<3>(0);
    q = (q * exp_so3(dx.segment<3>(3))).normalized();
    v += dx.segment<3>(6);
    bias.gyro += dx.segment<3>(9);
    bias.accel += dx.segment<3>(12);
  }

  Eigen::Matrix<double, 15, 1> boxminus(const KeyframeState& ref) const {
    Eigen::Matrix<double, 15, 1> dx;
    dx.segment<3>(0) = p - ref.p;
    dx.segment<3>(3) = log_so3(ref.q.conjugate() * q);
    dx.segment<3>(6) = v - ref.v;
    dx.segment<3>(9) = bias.gyro - ref.bias.gyro;
    dx.segment<3>(12) = bias.accel - ref.bias.accel;
    return dx;
  }

  Pose pose() const { return Pose(q, p); }
};

constexpr int kStateDim = 15;
constexpr int kSdP = 0;
constexpr int kSdTheta = 3;
constexpr int kSdV = 6;
constexpr int kSdBg = 9;
constexpr int kSdBa = 12;

struct BackendConfig {
  int window_size = 10;  // K keyframes
  double reprojection_info = 1.0 / (2.0e-3 * 2.0e-3);  // W_r = scalar * I2
  double ps_corner_info_scale = 1.0;  // W_r multiplier for ps_corner tracks
  double cauchy_scale = 1.0;           // robust kernel c, whitened units
  double ps_sigma = 0.10;              // meters, PS registration noise
  double ps_weight_scale = 1.0;        // relative weight of the PS term
  int max_iterations = 8;
  double damping_init = 1e-4;
  double damping_increase = 10.0;
  double damping_decrease = 0.3;
  double cost_decrease_tol = 1e-8;     // relative
  double step_norm_tol = 1e-10;
  bool enable_ps_frontend = true;
  bool enable_ps_backend = true;
  bool enable_reweighting = true;
  bool enable_marginalization = true;

  void validate() const {
    if (window_size < 2 || reprojection_info <= 0 || cauchy_scale <= 0 || ps_sigma <= 0 ||
        ps_weight_scale < 0 || max_iterations < 1)
      throw std::invalid_argument("BackendConfig: non-positive scale or tolerance");
  }
};

// ---------------------------------------------------------------------------
// Reprojection (anchored inverse depth)

struct ReprojectionEval {
  Vec2 residual;
  Eigen::Matrix<double, 2, kStateDim> j_anchor;
  Eigen::Matrix<double, 2, kStateDim> j_observer;
  Vec2 j_inv_depth;
  bool valid = true;  // false when the predicted depth is non-positive
};

// Residual of landmark j (inverse depth in the anchor camera) observed from
// another keyframe: observed - predicted normalized coordinates.
inline ReprojectionEval reprojection_residual(double inv_depth, const KeyframeState& anchor,
                                              const KeyframeState& observer, const Vec2& uv_anchor,
                                              const Vec2& uv_observed, const Pose& cam_in_body) {
  ReprojectionEval out;
  out.j_anchor.setZero();
  out.j_observer.setZero();
  out.j_inv_depth.setZero();

  if (inv_depth <= 0) {
    out.valid = false;
    out.residual.setZero();
    return out;
  }

  const Mat3 R_bc = cam_in_body.rotation();
  const Vec3 t_bc = cam_in_body.t;
  const Mat3 R_a = anchor.q.toRotationMatrix();
  const Mat3 R_o = observer.q.toRotationMatrix();

  const Vec3 h_a(uv_anchor.x() / inv_depth, uv_anchor.y() / inv_depth, 1.0 / inv_depth);
  const Vec3 b_a = R_bc * h_a + t_bc;
  const Vec3 w = R_a * b_a + anchor.p;
  const Vec3 b_o = R_o.transpose() * (w - observer.p);
  const Vec3 c_o = R_bc.transpose() * (b_o - t_bc);

  if (c_o.z() <= 1e-6) {
    out.valid = false;
    out.residual.setZero();
    return out;
  }

  out.residual = uv_observed - Vec2(c_o.x() / c_o.z(), c_o.y() / c_o.z());

  Eigen::Matrix<double, 2, 3> dpi;
  const double iz = 1.0 / c_o.z();
  dpi << iz, 0, -c_o.x() * iz * iz, 0, iz, -c_o.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> dr_dco = -dpi;
  const Eigen::Matrix<double, 2, 3> dr_dbo = dr_dco * R_bc.transpose();
  const Eigen::Matrix<double, 2, 3> dr_dw = dr_dbo * R_o.transpose();

  out.j_observer.block<2, 3>(0, kSdP) = -dr_dw;
  out.j_observer.block<2, 3>(0, kSdTheta) = dr_dbo * skew(b_o);
  out.j_anchor.block<2, 3>(0, kSdP) = dr_dw;
  out.j_anchor.block<2, 3>(0, kSdTheta) = -dr_dw * R_a * skew(b_a);
  out.j_inv_depth = dr_dw * (R_a * R_bc * (-h_a / inv_depth));
  return out;
}

// ---------------------------------------------------------------------------
// Inertial (IMU + WSS preintegration), 18-dim

struct InertialEval {
  Eigen::Matrix<double, kPreintDim, 1> residual;  // whitened
  Eigen::Matrix<double, kPreintDim, kStateDim> j_k;
  Eigen::Matrix<double, kPreintDim, kStateDim> j_k1;
  bool regularized = false;  // covariance needed the epsilon floor
};

inline Mat3 inverse_right_jacobian_so3(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 W = skew(theta);
  if (angle < 1e-8) return Mat3::Identity() + 0.5 * W + W * W / 12.0;
  const double half = 0.5 * angle;
  const double cot = std::cos(half) / std::sin(half);
  const double a2 = angle * angle;
  return Mat3::Identity() + 0.5 * W + (1.0 / a2 - 0.5 * cot / angle) * W * W;
}

// Square-root information of the preintegration covariance, eigenvalue
// floored at 1e-12.
inline Mat18 preint_sqrt_info(const Mat18& covariance, bool* regularized = nullptr) {
  const Eigen::SelfAdjointEigenSolver<Mat18> eig(covariance);
  Eigen::Matrix<double, kPreintDim, 1> vals = eig.eigenvalues();
  bool reg = false;
  for (int i = 0; i < kPreintDim; ++i) {
    if (vals[i] < 1e-12) {
      vals[i] = 1e-12;
      reg = true;
    }
  }
  if (regularized) *regularized = reg;
  return vals.cwiseInverse().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

inline InertialEval inertial_residual(const KeyframeState& xk, const KeyframeState& xk1,
                                      const PreintegratedMotion& m, const Mat18& sqrt_info) {
  InertialEval out;
  out.j_k.setZero();
  out.j_k1.setZero();

  const double T = m.dt_total;
  const Vec3 g = gravity_world();
  const Mat3 Rk_T = xk.q.toRotationMatrix().transpose();

  // first-order bias correction of the measured deltas
  const Vec3 dbg = xk.bias.gyro - m.linearization_bias.gyro;
  const Vec3 dba = xk.bias.accel - m.linearization_bias.accel;
  const Quat gamma = (m.delta_q * exp_so3(m.j_q_bg * dbg)).normalized();
  const Vec3 beta = m.delta_v + m.j_v_bg * dbg + m.j_v_ba * dba;
  const Vec3 alpha = m.delta_p + m.j_p_bg * dbg + m.j_p_ba * dba;

  const Quat q_rel = xk.q.conjugate() * xk1.q;
  const Vec3 r_theta = log_so3(gamma.conjugate() * q_rel);
  const Vec3 u_v = Rk_T * (xk1.v - xk.v - g * T);
  const Vec3 u_p = Rk_T * (xk1.p - xk.p - xk.v * T - 0.5 * g * T * T);
  const Vec3 u_w = Rk_T * (xk1.p - xk.p);

  Eigen::Matrix<double, kPreintDim, 1> r;
  r.segment<3>(kIdxTheta) = r_theta;
  r.segment<3>(kIdxVel) = u_v - beta;
  r.segment<3>(kIdxPos) = u_p - alpha;
  r.segment<3>(kIdxBg) = xk1.bias.gyro - xk.bias.gyro;
  r.segment<3>(kIdxBa) = xk1.bias.accel - xk.bias.accel;
  r.segment<3>(kIdxWss) = u_w - m.delta_p_wss;

  Eigen::Matrix<double, kPreintDim, kStateDim> jk, jk1;
  jk.setZero();
  jk1.setZero();

  const Mat3 jr_inv = inverse_right_jacobian_so3(r_theta);
  const Mat3 R_rel_T = q_rel.toRotationMatrix().transpose();
  const Mat3 R_err_T = exp_so3(r_theta).toRotationMatrix().transpose();
  jk.block<3, 3>(kIdxTheta, kSdTheta) = -jr_inv * R_rel_T;
  jk.block<3, 3>(kIdxTheta, kSdBg) = -jr_inv * R_err_T * m.j_q_bg;
  jk1.block<3, 3>(kIdxTheta, kSdTheta) = jr_inv;

  jk.block<3, 3>(kIdxVel, kSdTheta) = skew(u_v);
  jk.block<3, 3>(kIdxVel, kSdV) = -Rk_T;
  jk.block<3, 3>(kIdxVel, kSdBg) = -m.j_v_bg;
  jk.block<3, 3>(kIdxVel, kSdBa) = -m.j_v_ba;
  jk1.block<3, 3>(kIdxVel, kSdV) = Rk_T;

  jk.block<3, 3>(kIdxPos, kSdP) = -Rk_T;
  jk.block<3, 3>(kIdxPos, kSdTheta) = skew(u_p);
  jk.block<3, 3>(kIdxPos, kSdV) = -Rk_T * T;
  jk.block<3, 3>(kIdxPos, kSdBg) = -m.j_p_bg;
  jk.block<3, 3>(kIdxPos, kSdBa) = -m.j_p_ba;
  jk1.block<3, 3>(kIdxPos, kSdP) = Rk_T;

  jk.block<3, 3>(kIdxBg, kSdBg) = -Mat3::Identity();
  jk1.block<3, 3>(kIdxBg, kSdBg) = Mat3::Identity();
  jk.block<3, 3>(kIdxBa, kSdBa) = -Mat3::Identity();
  jk1.block<3, 3>(kIdxBa, kSdBa) = Mat3::Identity();

  jk.block<3, 3>(kIdxWss, kSdP) = -Rk_T;
  jk.block<3, 3>(kIdxWss, kSdTheta) = skew(u_w);
  jk1.block<3, 3>(kIdxWss, kSdP) = Rk_T;

  out.residual = sqrt_info * r;
  out.j_k = sqrt_info * jk;
  out.j_k1 = sqrt_info * jk1;
  return out;
}

// ---------------------------------------------------------------------------
// Parking slot registration (Eq. planar world-frame difference)

struct PsEval {
  Vec2 residual;
  Eigen::Matrix<double, 2, kStateDim> j_k;
};

// r = (R_k L + p_k - O)_xy with the anchor O held fixed for the window.
inline PsEval ps_residual(const KeyframeState& xk, const Vec2& slot_center_body,
                          const Vec2& anchor_world) {
  PsEval out;
  out.j_k.setZero();
  const Vec3 L(slot_center_body.x(), slot_center_body.y(), 0.0);
  const Mat3 R = xk.q.toRotationMatrix();
  const Vec3 w = R * L + xk.p;
  out.residual = w.head<2>() - anchor_world;
  out.j_k.block<2, 3>(0, kSdP) = Eigen::Matrix<double, 2, 3>::Identity();
  out.j_k.block<2, 3>(0, kSdTheta) = (-R * skew(L)).topRows<2>();
  return out;
}

// Observation reweighting: alpha_i = N exp(-d_i) / sum_j exp(-d_j) over the
// N slots seen in one detection frame; d is the normalized pixel distance of
// each slot center from the BEV image center.
inline std::vector<double> ps_weights(const std::vector<double>& center_distances) {
  const size_t n = center_distances.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  double denom = 0;
  for (double d : center_distances) denom += std::exp(-d);
  for (size_t i = 0; i < n; ++i) out[i] = n * std::exp(-center_distances[i]) / denom;
  return out;
}

// ---------------------------------------------------------------------------
// Robust kernel (Cauchy)

struct RobustEval {
  double cost = 0;
  double weight = 1;       // rho'(s), the IRLS first-derivative weight
  double curvature = 0;    // rho''(s)
};

inline RobustEval robust_cost(double s, double cauchy_scale) {
  if (s < 0) throw std::invalid_argument("robust_cost: squared norm must be non-negative");
  RobustEval out;
  const double c2 = cauchy_scale * cauchy_scale;
  const double u = 1.0 + s / c2;
  out.cost = c2 * std::log(u);
  out.weight = 1.0 / u;
  out.curvature = -1.0 / (c2 * u * u);
  return out;
}

}  // namespace parkvio
