#include "parkvio/solver.hpp"

#include <gtest/gtest.h>

#include "window_fixture.hpp"

using namespace parkvio;
using parkvio::testing::make_scene;

namespace {

BackendConfig tight_config() {
  BackendConfig c;
  c.reprojection_info = 1.0 / (1e-4 * 1e-4);
  c.max_iterations = 15;
  c.cost_decrease_tol = 1e-12;
  return c;
}

double state_error(const SlidingWindow& window, const std::vector<KeyframeState>& truth) {
  double err = 0;
  for (int k = 0; k < window.size(); ++k)
    err = std::max(err, (window.states[k].p - truth[k].p).norm());
  return err;
}

}  // namespace

TEST(OptimizeWindow, GroundTruthIsFixedPoint) {
  auto scene = make_scene(6, 40, 51);
  const auto report = optimize_window(scene.window, tight_config());
  EXPECT_LE(report.iterations, 2);
  EXPECT_LT(report.final_cost.total(), 1e-12);
  EXPECT_LT(state_error(scene.window, scene.truth), 1e-10);
}

TEST(OptimizeWindow, RecoversPerturbedKeyframe) {
  auto scene = make_scene(6, 60, 52);
  scene.window.states[3].p += Vec3(0.05, -0.03, 0.02);
  scene.window.states[3].q =
      (scene.window.states[3].q * exp_so3(Vec3(0.01, -0.01, 0.02))).normalized();
  const auto report = optimize_window(scene.window, tight_config());
  EXPECT_LT(state_error(scene.window, scene.truth), 1e-6);
  EXPECT_LT(report.final_cost.total(), report.initial_cost.total());
}

TEST(OptimizeWindow, CostNeverIncreasesAcrossAcceptedSteps) {
  auto scene = make_scene(6, 40, 53);
  for (int k = 1; k < scene.window.size(); ++k)
    scene.window.states[k].p += Vec3(0.02 * k, -0.01 * k, 0.0);
  const auto report = optimize_window(scene.window, tight_config());
  double last = report.initial_cost.total();
  for (const auto& it : report.trace) {
    if (it.accepted) {
      EXPECT_LE(it.cost.total(), last + 1e-12);
      last = it.cost.total();
    }
  }
  EXPECT_LE(report.final_cost.total(), report.initial_cost.total());
}

TEST(OptimizeWindow, PsFactorsAreActiveConstraints) {
  auto drifted = make_scene(6, 40, 54, /*with_ps=*/true);
  auto drifted_no_ps = drifted;

  // inject drift and give the PS anchors authority by weakening vision
  BackendConfig with_ps = tight_config();
  with_ps.reprojection_info = 1.0 / (2e-3 * 2e-3);
  with_ps.ps_sigma = 0.05;
  BackendConfig no_ps = with_ps;
  no_ps.enable_ps_backend = false;

  for (int k = 1; k < drifted.window.size(); ++k) {
    drifted.window.states[k].p += Vec3(0.03 * k, 0.02 * k, 0);
    drifted_no_ps.window.states[k].p += Vec3(0.03 * k, 0.02 * k, 0);
  }
  // shift the anchors so the PS term pulls away from the visual optimum
  for (auto& f : drifted.window.ps_factors) f.anchor_world += Vec2(0.05, -0.02);
  for (auto& f : drifted_no_ps.window.ps_factors) f.anchor_world += Vec2(0.05, -0.02);

  optimize_window(drifted.window, with_ps);
  optimize_window(drifted_no_ps.window, no_ps);

  double diff = 0;
  for (int k = 0; k < drifted.window.size(); ++k)
    diff = std::max(diff, (drifted.window.states[k].p - drifted_no_ps.window.states[k].p).norm());
  EXPECT_GT(diff, 1e-5);
}

TEST(OptimizeWindow, GaugeFixedSystemIsNonsingular) {
  auto scene = make_scene(6, 40, 55);
  const Eigen::MatrixXd H = gauge_reduced_hessian(scene.window, tight_config());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 1e-10);
}

TEST(OptimizeWindow, NonFiniteCostAborts) {
  auto scene = make_scene(4, 20, 56);
  scene.window.states[2].p = Vec3(NAN, 0, 0);
  EXPECT_THROW(optimize_window(scene.window, tight_config()), std::runtime_error);
}

// marginal information over the kept states of a linear-Gaussian chain
// equals the dense computation from the joint Gaussian
TEST(Marginalize, ToyChainMatchesJointGaussian) {
  // 3 scalar states, prior on x0, odometry x0->x1, x1->x2
  // factors: (x0 - 1)^2 / s0, (x1 - x0 - d0)^2 / s1, (x2 - x1 - d1)^2 / s2
  const double s0 = 0.5, s1 = 0.2, s2 = 0.4;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 3);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
  // evaluated at x = (0.9, 2.1, 2.9), prior mean 1, d0 = 1, d1 = 1
  const Eigen::Vector3d x(0.9, 2.1, 2.9);
  const double r0 = x[0] - 1.0, r1 = x[1] - x[0] - 1.0, r2 = x[2] - x[1] - 1.0;
  // J rows: [1 0 0], [-1 1 0], [0 -1 1]
  Eigen::Matrix3d J;
  J << 1, 0, 0, -1, 1, 0, 0, -1, 1;
  const Eigen::Vector3d w(1 / s0, 1 / s1, 1 / s2);
  const Eigen::Vector3d r(r0, r1, r2);
  H = J.transpose() * w.asDiagonal() * J;
  g = J.transpose() * w.asDiagonal() * r;

  const auto marg = schur_marginalize(H, g, 1);
  ASSERT_FALSE(marg.clamped);

  // direct: joint covariance, condition on nothing, marginalize x0
  const Eigen::Matrix3d cov = H.inverse();
  const Eigen::Matrix2d cov_keep = cov.bottomRightCorner<2, 2>();
  const Eigen::Matrix2d H_expected = cov_keep.inverse();
  EXPECT_LT((marg.H - H_expected).norm(), 1e-9);

  // the marginal g must keep the same minimizer for the kept variables
  const Eigen::Vector3d dx_joint = H.ldlt().solve(-g);
  const Eigen::Vector2d dx_marg = marg.H.ldlt().solve(-marg.g);
  EXPECT_LT((dx_joint.tail<2>() - dx_marg).norm(), 1e-9);
}

TEST(Marginalize, PriorSquareRootReconstructs) {
  Eigen::MatrixXd H(3, 3);
  H << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  Eigen::VectorXd g(3);
  g << 0.3, -0.2, 0.1;
  const auto [J, r0] = prior_square_root(H, g);
  EXPECT_LT((J.transpose() * J - H).norm(), 1e-10);
  EXPECT_LT((J.transpose() * r0 - g).norm(), 1e-10);
}

TEST(Marginalize, IndefiniteClamped) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 2);
  H(0, 0) = -1.0;  // eliminating nothing useful; kept block indefinite
  H(1, 1) = -0.5;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  const auto marg = schur_marginalize(H, g, 1);
  EXPECT_TRUE(marg.clamped);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(marg.H);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
}

TEST(MarginalizeOldest, EmptyWhenNothingTouchesOldest) {
  SlidingWindow window;
  for (int k = 0; k < 3; ++k) {
    window.ids.push_back(k);
    KeyframeState s;
    s.t = 0.1 * k;
    window.states.push_back(s);
  }
  // no links, no landmarks, no prior
  EXPECT_FALSE(marginalize_oldest(window, BackendConfig()).has_value());
}

TEST(MarginalizeOldest, ZeroNoiseCyclesStayAtTruth) {
  auto scene = make_scene(6, 50, 57);
  BackendConfig config = tight_config();

  for (int cycle = 0; cycle < 2; ++cycle) {
    optimize_window(scene.window, config);
    const auto prior = marginalize_oldest(scene.window, config);
    ASSERT_TRUE(prior.has_value());

    // shift the window: drop kf0 and everything anchored there
    SlidingWindow next;
    next.cam_in_body = scene.window.cam_in_body;
    next.ids.assign(scene.window.ids.begin() + 1, scene.window.ids.end());
    next.states.assign(scene.window.states.begin() + 1, scene.window.states.end());
    next.links.assign(scene.window.links.begin() + 1, scene.window.links.end());
    next.link_sqrt_info.assign(scene.window.link_sqrt_info.begin() + 1,
                               scene.window.link_sqrt_info.end());
    for (const auto& lm : scene.window.landmarks) {
      if (lm.anchor == 0) continue;  // consumed
      LandmarkParam shifted = lm;
      shifted.anchor -= 1;
      shifted.observations.clear();
      for (const auto& [kf, uv] : lm.observations)
        if (kf != 0) shifted.observations.emplace_back(kf - 1, uv);
      next.landmarks.push_back(shifted);
    }
    next.prior = prior;
    scene.window = std::move(next);
    scene.truth.erase(scene.truth.begin());

    optimize_window(scene.window, config);
    EXPECT_LT(state_error(scene.window, scene.truth), 1e-8) << "cycle " << cycle;
  }
}
