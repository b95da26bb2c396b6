#pragma once

#include "parkvio/rng.hpp"
#include "parkvio/solver.hpp"

#include <vector>

namespace parkvio::testing {

inline KeyframeState random_state(Rng& rng, double t) {
  KeyframeState s;
  s.t = t;
  s.p = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
  s.v = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5));
  Vec3 theta(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 1.0));
  s.q = exp_so3(theta);
  s.bias.gyro = Vec3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.01));
  s.bias.accel = Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
  return s;
}

// Preintegrated link exactly consistent with the two states (zero-noise
// factor), with covariance set to a fixed diagonal and randomized bias
// Jacobians so residual derivative paths are exercised.
inline PreintegratedMotion exact_link(const KeyframeState& a, const KeyframeState& b, Rng& rng,
                                      double jacobian_scale = 0.1) {
  PreintegratedMotion m;
  m.dt_total = b.t - a.t;
  const double T = m.dt_total;
  const Mat3 Ra_T = a.q.toRotationMatrix().transpose();
  const Vec3 g = gravity_world();
  m.delta_q = (a.q.conjugate() * b.q).normalized();
  m.delta_v = Ra_T * (b.v - a.v - g * T);
  m.delta_p = Ra_T * (b.p - a.p - a.v * T - 0.5 * g * T * T);
  m.delta_p_wss = Ra_T * (b.p - a.p);
  m.linearization_bias = a.bias;
  const auto rand3 = [&]() {
    Mat3 j;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j(r, c) = rng.normal(0, jacobian_scale);
    return j;
  };
  m.j_q_bg = rand3();
  m.j_v_bg = rand3();
  m.j_v_ba = rand3();
  m.j_p_bg = rand3();
  m.j_p_ba = rand3();
  m.covariance = 1e-4 * Mat18::Identity();
  return m;
}

struct SyntheticScene {
  SlidingWindow window;
  std::vector<KeyframeState> truth;
  std::vector<Vec3> landmark_positions;
};

// Window of K keyframes moving forward with landmarks ahead; all factors
// exactly consistent at the ground truth.
inline SyntheticScene make_scene(int K, int n_landmarks, uint64_t seed, bool with_ps = false) {
  Rng rng(seed);
  SyntheticScene scene;
  scene.window.cam_in_body = BevCalibration::default_front_camera();
  const Pose cam = scene.window.cam_in_body;

  // smooth forward trajectory with mild yaw
  for (int k = 0; k < K; ++k) {
    KeyframeState s;
    s.t = 0.2 * k;
    const double yaw = 0.05 * k;
    s.q = exp_so3(Vec3(0, 0, yaw));
    s.p = Vec3(0.4 * k, 0.02 * k * k, 0.0);
    s.v = s.q * Vec3(2.0, 0, 0);
    scene.truth.push_back(s);
    scene.window.ids.push_back(k);
    scene.window.states.push_back(s);
  }

  for (int k = 0; k + 1 < K; ++k) {
    auto link = exact_link(scene.truth[k], scene.truth[k + 1], rng);
    scene.window.link_sqrt_info.push_back(preint_sqrt_info(link.covariance));
    scene.window.links.push_back(std::move(link));
  }

  // landmarks in front of the whole trajectory
  FrontCamera camera;
  camera.cam_in_body = cam;
  int made = 0;
  while (made < n_landmarks) {
    const Vec3 lw(rng.uniform(3, 14), rng.uniform(-4, 4), rng.uniform(0.2, 2.5));
    bool visible_everywhere = true;
    for (const auto& s : scene.truth)
      if (!camera.visible(world_to_body(lw, s.pose()))) visible_everywhere = false;
    if (!visible_everywhere) continue;

    LandmarkParam lm;
    lm.feature_id = made;
    lm.anchor = 0;
    const Vec3 cam_pt = world_to_body(world_to_body(lw, scene.truth[0].pose()), cam);
    lm.anchor_uv = Vec2(cam_pt.x() / cam_pt.z(), cam_pt.y() / cam_pt.z());
    lm.inv_depth = 1.0 / cam_pt.z();
    for (int k = 1; k < K; ++k) {
      const Vec3 ck = world_to_body(world_to_body(lw, scene.truth[k].pose()), cam);
      lm.observations.emplace_back(k, Vec2(ck.x() / ck.z(), ck.y() / ck.z()));
    }
    scene.window.landmarks.push_back(lm);
    scene.landmark_positions.push_back(lw);
    made += 1;
  }

  if (with_ps) {
    for (int k = 0; k < K; ++k) {
      // two slots flanking the vehicle
      for (double side : {-5.0, 5.0}) {
        const Vec2 world_center(2.0 + 0.5 * k + (side > 0 ? 1.0 : 0.0), side);
        const Vec3 body = world_to_body(Vec3(world_center.x(), world_center.y(), 0),
                                        scene.truth[k].pose());
        PsFactor f;
        f.kf = k;
        f.slot_id = side > 0 ? 1 : 0;
        f.center_body = body.head<2>();
        f.anchor_world = world_center;
        f.alpha = 1.0;
        scene.window.ps_factors.push_back(f);
      }
    }
  }
  return scene;
}

}  // namespace parkvio::testing
