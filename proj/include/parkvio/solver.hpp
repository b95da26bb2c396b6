#pragma once

#include "parkvio/residuals.hpp"

#include <optional>
#include <sstream>
#include <vector>

namespace parkvio {

struct LandmarkParam {
  int feature_id = -1;
  int anchor = -1;  // window index of the anchoring keyframe
  Vec2 anchor_uv{0, 0};
  double inv_depth = 0.5;
  bool ps_corner = false;  // weighted by ps_corner_info_scale
  std::vector<std::pair<int, Vec2>> observations;  // (window index, uv), excludes the anchor
};

struct PsFactor {
  int kf = -1;  // window index
  int slot_id = -1;
  Vec2 center_body{0, 0};
  Vec2 anchor_world{0, 0};
  double alpha = 1.0;  // reweighting term, 0 when the slot is unobserved
};

// Dense linear prior over a set of keyframes, linearized at `lin`:
//   r(x) = residual0 + J * boxminus(x, lin)
struct PriorFactor {
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd residual0;
  std::vector<long> kf_ids;
  std::vector<KeyframeState> lin;
};

struct SlidingWindow {
  std::vector<long> ids;  // global keyframe ids, strictly increasing
  std::vector<KeyframeState> states;
  std::vector<PreintegratedMotion> links;  // size K-1, link i joins kf i and i+1
  std::vector<Mat18> link_sqrt_info;
  std::vector<LandmarkParam> landmarks;
  std::vector<PsFactor> ps_factors;
  std::optional<PriorFactor> prior;
  Pose cam_in_body = BevCalibration::default_front_camera();

  int size() const { return static_cast<int>(states.size()); }
};

struct CostBreakdown {
  double visual = 0;
  double inertial = 0;
  double ps = 0;
  double prior = 0;
  double total() const { return visual + inertial + ps + prior; }
};

struct IterationRecord {
  int iteration = 0;
  CostBreakdown cost;
  double damping = 0;
  double step_norm = 0;
  bool accepted = false;
};

struct SolveReport {
  int iterations = 0;
  CostBreakdown initial_cost;
  CostBreakdown final_cost;
  std::string convergence = "max_iterations";
  bool converged = false;
  int deactivated_reprojections = 0;
  bool covariance_regularized = false;
  std::vector<IterationRecord> trace;
};

namespace detail {

inline Eigen::VectorXd prior_residual(const PriorFactor& prior, const SlidingWindow& window,
                                      std::vector<int>* local_of = nullptr) {
  Eigen::VectorXd dx(15 * prior.kf_ids.size());
  for (size_t b = 0; b < prior.kf_ids.size(); ++b) {
    int local = -1;
    for (int k = 0; k < window.size(); ++k)
      if (window.ids[k] == prior.kf_ids[b]) local = k;
    if (local < 0) throw std::logic_error("prior references a keyframe outside the window");
    if (local_of) local_of->push_back(local);
    dx.segment<15>(15 * b) = window.states[local].boxminus(prior.lin[b]);
  }
  return prior.residual0 + prior.jacobian * dx;
}

}  // namespace detail

inline CostBreakdown evaluate_costs(const SlidingWindow& window, const BackendConfig& config,
                                    int* deactivated = nullptr) {
  CostBreakdown cost;
  for (const auto& lm : window.landmarks) {
    const double w_r = config.reprojection_info *
                       (lm.ps_corner ? config.ps_corner_info_scale : 1.0);
    for (const auto& [kf, uv] : lm.observations) {
      const auto eval = reprojection_residual(lm.inv_depth, window.states[lm.anchor],
                                              window.states[kf], lm.anchor_uv, uv,
                                              window.cam_in_body);
      if (!eval.valid) {
        if (deactivated) ++(*deactivated);
        continue;
      }
      cost.visual += w_r * eval.residual.squaredNorm();
    }
  }
  for (size_t i = 0; i < window.links.size(); ++i) {
    const auto eval = inertial_residual(window.states[i], window.states[i + 1], window.links[i],
                                        window.link_sqrt_info[i]);
    cost.inertial += eval.residual.squaredNorm();
  }
  if (config.enable_ps_backend) {
    const double inv_sigma2 = 1.0 / (config.ps_sigma * config.ps_sigma);
    for (const auto& f : window.ps_factors) {
      if (f.alpha <= 0) continue;
      const auto eval = ps_residual(window.states[f.kf], f.center_body, f.anchor_world);
      const double s = config.ps_weight_scale * f.alpha * inv_sigma2 * eval.residual.squaredNorm();
      cost.ps += robust_cost(s, config.cauchy_scale).cost;
    }
  }
  if (window.prior.has_value())
    cost.prior += detail::prior_residual(*window.prior, window).squaredNorm();

  if (!std::isfinite(cost.total())) {
    std::ostringstream msg;
    msg << "non-finite cost: visual=" << cost.visual << " inertial=" << cost.inertial
        << " ps=" << cost.ps << " prior=" << cost.prior;
    throw std::runtime_error(msg.str());
  }
  return cost;
}

namespace detail {

struct NormalEquations {
  Eigen::MatrixXd H_pp;
  Eigen::VectorXd g_p;
  Eigen::MatrixXd H_pl;
  Eigen::VectorXd H_ll;  // diagonal
  Eigen::VectorXd g_l;
  std::vector<int> lm_index;  // landmark -> column, -1 when inactive
  int n_lm = 0;
};

inline NormalEquations assemble_normal_equations(const SlidingWindow& window,
                                                 const BackendConfig& config,
                                                 CostBreakdown* cost_out = nullptr,
                                                 int* deactivated = nullptr) {
  const int K = window.size();
  const int pose_dim = kStateDim * K;
  CostBreakdown cost;
  NormalEquations ne;
  ne.lm_index.assign(window.landmarks.size(), -1);
  for (size_t j = 0; j < window.landmarks.size(); ++j)
    if (!window.landmarks[j].observations.empty()) ne.lm_index[j] = ne.n_lm++;

  ne.H_pp = Eigen::MatrixXd::Zero(pose_dim, pose_dim);
  ne.g_p = Eigen::VectorXd::Zero(pose_dim);
  ne.H_pl = Eigen::MatrixXd::Zero(pose_dim, ne.n_lm);
  ne.H_ll = Eigen::VectorXd::Zero(ne.n_lm);
  ne.g_l = Eigen::VectorXd::Zero(ne.n_lm);

  // visual factors
  for (size_t j = 0; j < window.landmarks.size(); ++j) {
    const auto& lm = window.landmarks[j];
    const int col = ne.lm_index[j];
    if (col < 0) continue;
    const double w_r = config.reprojection_info *
                       (lm.ps_corner ? config.ps_corner_info_scale : 1.0);
    for (const auto& [kf, uv] : lm.observations) {
      const auto eval = reprojection_residual(lm.inv_depth, window.states[lm.anchor],
                                              window.states[kf], lm.anchor_uv, uv,
                                              window.cam_in_body);
      if (!eval.valid) {
        if (deactivated) ++(*deactivated);
        continue;
      }
      cost.visual += w_r * eval.residual.squaredNorm();
      const int ia = kStateDim * lm.anchor;
      const int io = kStateDim * kf;
      ne.H_pp.block<15, 15>(ia, ia) += w_r * eval.j_anchor.transpose() * eval.j_anchor;
      ne.H_pp.block<15, 15>(io, io) += w_r * eval.j_observer.transpose() * eval.j_observer;
      ne.H_pp.block<15, 15>(ia, io) += w_r * eval.j_anchor.transpose() * eval.j_observer;
      ne.H_pp.block<15, 15>(io, ia) += w_r * eval.j_observer.transpose() * eval.j_anchor;
      ne.g_p.segment<15>(ia) += w_r * eval.j_anchor.transpose() * eval.residual;
      ne.g_p.segment<15>(io) += w_r * eval.j_observer.transpose() * eval.residual;
      ne.H_pl.block<15, 1>(ia, col) += w_r * eval.j_anchor.transpose() * eval.j_inv_depth;
      ne.H_pl.block<15, 1>(io, col) += w_r * eval.j_observer.transpose() * eval.j_inv_depth;
      ne.H_ll[col] += w_r * eval.j_inv_depth.squaredNorm();
      ne.g_l[col] += w_r * eval.j_inv_depth.dot(eval.residual);
    }
  }

  // inertial links
  for (size_t i = 0; i < window.links.size(); ++i) {
    const auto eval = inertial_residual(window.states[i], window.states[i + 1], window.links[i],
                                        window.link_sqrt_info[i]);
    cost.inertial += eval.residual.squaredNorm();
    const int i0 = kStateDim * static_cast<int>(i);
    const int i1 = i0 + kStateDim;
    ne.H_pp.block<15, 15>(i0, i0) += eval.j_k.transpose() * eval.j_k;
    ne.H_pp.block<15, 15>(i1, i1) += eval.j_k1.transpose() * eval.j_k1;
    ne.H_pp.block<15, 15>(i0, i1) += eval.j_k.transpose() * eval.j_k1;
    ne.H_pp.block<15, 15>(i1, i0) += eval.j_k1.transpose() * eval.j_k;
    ne.g_p.segment<15>(i0) += eval.j_k.transpose() * eval.residual;
    ne.g_p.segment<15>(i1) += eval.j_k1.transpose() * eval.residual;
  }

  // PS registration factors with Cauchy IRLS weights
  if (config.enable_ps_backend) {
    const double inv_sigma2 = 1.0 / (config.ps_sigma * config.ps_sigma);
    for (const auto& f : window.ps_factors) {
      if (f.alpha <= 0) continue;
      const auto eval = ps_residual(window.states[f.kf], f.center_body, f.anchor_world);
      const double scale = config.ps_weight_scale * f.alpha * inv_sigma2;
      const double s = scale * eval.residual.squaredNorm();
      const auto robust = robust_cost(s, config.cauchy_scale);
      cost.ps += robust.cost;
      const double w = robust.weight * scale;
      const int ik = kStateDim * f.kf;
      ne.H_pp.block<15, 15>(ik, ik) += w * eval.j_k.transpose() * eval.j_k;
      ne.g_p.segment<15>(ik) += w * eval.j_k.transpose() * eval.residual;
    }
  }

  // marginalization prior
  if (window.prior.has_value()) {
    std::vector<int> local;
    const Eigen::VectorXd r = prior_residual(*window.prior, window, &local);
    cost.prior += r.squaredNorm();
    const auto& J = window.prior->jacobian;
    for (size_t a = 0; a < local.size(); ++a) {
      const auto Ja = J.middleCols(15 * a, 15);
      ne.g_p.segment<15>(kStateDim * local[a]) += Ja.transpose() * r;
      for (size_t b = 0; b < local.size(); ++b) {
        const auto Jb = J.middleCols(15 * b, 15);
        ne.H_pp.block<15, 15>(kStateDim * local[a], kStateDim * local[b]) += Ja.transpose() * Jb;
      }
    }
  }
  if (!std::isfinite(cost.total()))
    throw std::runtime_error("non-finite cost during assembly: visual=" +
                             std::to_string(cost.visual) + " inertial=" +
                             std::to_string(cost.inertial) + " ps=" + std::to_string(cost.ps) +
                             " prior=" + std::to_string(cost.prior));
  if (cost_out) *cost_out = cost;
  return ne;
}

// Basis of the free subspace under the 4-DOF gauge: keyframe 0 position
// fixed, its rotation restricted orthogonal to the world yaw axis.
inline Eigen::MatrixXd gauge_basis(const SlidingWindow& window) {
  const int K = window.size();
  const int pose_dim = kStateDim * K;
  const Vec3 yaw_axis_body = (window.states[0].q.conjugate() * Vec3::UnitZ()).normalized();
  const Vec3 seed = std::abs(yaw_axis_body.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 n1 = (yaw_axis_body.cross(seed)).normalized();
  const Vec3 n2 = (yaw_axis_body.cross(n1)).normalized();

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(pose_dim, pose_dim - 4);
  int col = 0;
  B.block<3, 1>(kSdTheta, col++) = n1;
  B.block<3, 1>(kSdTheta, col++) = n2;
  for (int d = kSdV; d < kStateDim; ++d) B(d, col++) = 1.0;
  for (int k = 1; k < K; ++k)
    for (int d = 0; d < kStateDim; ++d) B(kStateDim * k + d, col++) = 1.0;
  return B;
}

}  // namespace detail

// Gauge-reduced Hessian of the landmark-eliminated system, no damping.
// Exposed for the well-posedness checks.
inline Eigen::MatrixXd gauge_reduced_hessian(const SlidingWindow& window,
                                             const BackendConfig& config) {
  const auto ne = detail::assemble_normal_equations(window, config);
  Eigen::VectorXd H_ll_inv(ne.n_lm);
  for (int c = 0; c < ne.n_lm; ++c) H_ll_inv[c] = ne.H_ll[c] > 1e-12 ? 1.0 / ne.H_ll[c] : 0.0;
  const Eigen::MatrixXd H_red =
      ne.H_pp - ne.H_pl * H_ll_inv.asDiagonal() * ne.H_pl.transpose();
  const Eigen::MatrixXd B = detail::gauge_basis(window);
  return B.transpose() * H_red * B;
}

// Damped Gauss-Newton over the window. Landmarks are eliminated with a
// Schur complement; the first keyframe's position and world yaw are held
// fixed (4-DOF gauge).
inline SolveReport optimize_window(SlidingWindow& window, const BackendConfig& config) {
  config.validate();
  const int K = window.size();
  if (K < 1) throw std::invalid_argument("optimize_window: empty window");

  SolveReport report;

  const Eigen::MatrixXd B = detail::gauge_basis(window);
  const Vec3 gauge_p0 = window.states[0].p;
  const Quat gauge_q0 = window.states[0].q;

  double damping = config.damping_init;
  std::string reason = "max_iterations";
  bool converged = false;

  // one evaluation per iterate: the assembly at the trial state doubles as
  // its cost evaluation, and a rejected step reuses the cached system
  CostBreakdown current;
  auto ne = detail::assemble_normal_equations(window, config, &current,
                                              &report.deactivated_reprojections);
  report.initial_cost = current;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const int n_lm = ne.n_lm;
    const auto& lm_index = ne.lm_index;

    // Schur-eliminate the landmarks
    Eigen::VectorXd H_ll_inv(n_lm);
    for (int c = 0; c < n_lm; ++c) H_ll_inv[c] = ne.H_ll[c] > 1e-12 ? 1.0 / ne.H_ll[c] : 0.0;
    const Eigen::MatrixXd H_pl_ll = ne.H_pl * H_ll_inv.asDiagonal();
    const Eigen::MatrixXd H_red = ne.H_pp - H_pl_ll * ne.H_pl.transpose();
    const Eigen::VectorXd g_red = ne.g_p - H_pl_ll * ne.g_l;

    // gauge reduction and Levenberg damping
    Eigen::MatrixXd H_gauge = B.transpose() * H_red * B;
    const Eigen::VectorXd g_gauge = B.transpose() * g_red;
    Eigen::VectorXd diag = H_gauge.diagonal().cwiseMax(1e-9);
    H_gauge += (damping * diag).asDiagonal().toDenseMatrix();

    const Eigen::VectorXd step_gauge = H_gauge.ldlt().solve(-g_gauge);
    const Eigen::VectorXd step_pose = B * step_gauge;
    const Eigen::VectorXd step_lm =
        H_ll_inv.asDiagonal() * (-ne.g_l - ne.H_pl.transpose() * step_pose);
    const double step_norm = std::sqrt(step_pose.squaredNorm() + step_lm.squaredNorm());

    // trial update
    std::vector<KeyframeState> saved_states = window.states;
    std::vector<double> saved_depths;
    saved_depths.reserve(window.landmarks.size());
    for (const auto& lm : window.landmarks) saved_depths.push_back(lm.inv_depth);

    for (int k = 0; k < K; ++k)
      window.states[k].boxplus(step_pose.segment<15>(kStateDim * k));
    for (size_t j = 0; j < window.landmarks.size(); ++j) {
      if (lm_index[j] < 0) continue;
      window.landmarks[j].inv_depth =
          std::max(1e-4, window.landmarks[j].inv_depth + step_lm[lm_index[j]]);
    }

    CostBreakdown trial;
    auto ne_trial = detail::assemble_normal_equations(window, config, &trial);

    IterationRecord rec;
    rec.iteration = iter;
    rec.cost = trial;
    rec.damping = damping;
    rec.step_norm = step_norm;
    rec.accepted = trial.total() < current.total();
    report.trace.push_back(rec);
    report.iterations = iter + 1;

    if (rec.accepted) {
      const double decrease = (current.total() - trial.total()) /
                              std::max(current.total(), 1e-300);
      current = trial;
      ne = std::move(ne_trial);
      damping = std::max(1e-12, damping * config.damping_decrease);
      if (decrease < config.cost_decrease_tol) {
        reason = "cost_decrease";
        converged = true;
        break;
      }
      if (step_norm < config.step_norm_tol) {
        reason = "step_norm";
        converged = true;
        break;
      }
    } else {
      window.states = saved_states;
      for (size_t j = 0; j < window.landmarks.size(); ++j)
        window.landmarks[j].inv_depth = saved_depths[j];
      damping *= config.damping_increase;
      if (step_norm < config.step_norm_tol) {
        reason = "step_norm";
        converged = true;
        break;
      }
    }
  }

  // Re-anchor the gauge: nonlinear steps leak a second-order world yaw
  // around keyframe 0, so rotate the window back onto its fixed yaw.
  {
    const Vec3 left_err = log_so3(window.states[0].q * gauge_q0.conjugate());
    const double leaked_yaw = left_err.z();
    if (std::abs(leaked_yaw) > 0) {
      const Quat S = exp_so3(Vec3(0, 0, -leaked_yaw));
      for (auto& s : window.states) {
        s.q = (S * s.q).normalized();
        s.p = gauge_p0 + S * (s.p - gauge_p0);
        s.v = S * s.v;
      }
      current = evaluate_costs(window, config);
    }
  }

  report.final_cost = current;
  report.convergence = reason;
  report.converged = converged;
  return report;
}

// ---------------------------------------------------------------------------
// Marginalization

struct MarginalizationResult {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  bool clamped = false;  // indefinite Schur complement was floored at zero
};

// Schur complement of the leading `elim_dim` block out of [H, g]; variables
// must be ordered [eliminated; kept].
inline MarginalizationResult schur_marginalize(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                               int elim_dim) {
  MarginalizationResult out;
  const int total = static_cast<int>(H.rows());
  const int keep = total - elim_dim;
  if (elim_dim <= 0) {
    out.H = H;
    out.g = g;
    return out;
  }
  const Eigen::MatrixXd H_ee = 0.5 * (H.topLeftCorner(elim_dim, elim_dim) +
                                      H.topLeftCorner(elim_dim, elim_dim).transpose());
  const Eigen::MatrixXd H_er = H.topRightCorner(elim_dim, keep);
  const Eigen::MatrixXd H_rr = H.bottomRightCorner(keep, keep);

  // pseudo-inverse of the eliminated block
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H_ee);
  Eigen::VectorXd vals = eig.eigenvalues();
  const double floor = 1e-10 * std::max(1.0, vals.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(elim_dim);
  for (int i = 0; i < elim_dim; ++i) inv[i] = vals[i] > floor ? 1.0 / vals[i] : 0.0;
  const Eigen::MatrixXd H_ee_inv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();

  out.H = H_rr - H_er.transpose() * H_ee_inv * H_er;
  out.H = 0.5 * (out.H + out.H.transpose()).eval();
  out.g = g.tail(keep) - H_er.transpose() * (H_ee_inv * g.head(elim_dim));

  // clamp an indefinite result
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(out.H);
  if (check.eigenvalues().minCoeff() < -1e-9) {
    Eigen::VectorXd clamped = check.eigenvalues().cwiseMax(0.0);
    out.H = check.eigenvectors() * clamped.asDiagonal() * check.eigenvectors().transpose();
    out.clamped = true;
  }
  return out;
}

// Converts an information-form prior (H*, g*) into a square-root factor
// r(dx) = r0 + J dx with J^T J = H* and J^T r0 = g*.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> prior_square_root(const Eigen::MatrixXd& H,
                                                                     const Eigen::VectorXd& g) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  const double floor = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<int> keep;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()[i] > floor) keep.push_back(i);
  Eigen::MatrixXd J(keep.size(), H.cols());
  Eigen::VectorXd r0(keep.size());
  for (size_t r = 0; r < keep.size(); ++r) {
    const int i = keep[r];
    const double s = std::sqrt(eig.eigenvalues()[i]);
    J.row(r) = s * eig.eigenvectors().col(i).transpose();
    r0[r] = eig.eigenvectors().col(i).dot(g) / s;
  }
  return {J, r0};
}

// Schur-complements keyframe 0 (and the inverse depths it anchors) out of
// the factors that touch it: the previous prior, the first inertial link,
// reprojection factors anchored at keyframe 0 and PS factors attached to
// it. Returns the dense prior over the remaining connected keyframes, or
// nullopt when nothing touches keyframe 0. The caller shifts the window.
inline std::optional<PriorFactor> marginalize_oldest(const SlidingWindow& window,
                                                     const BackendConfig& config,
                                                     bool* clamped = nullptr) {
  if (window.size() < 2) return std::nullopt;

  // keyframes connected to kf0 through consumed factors
  std::vector<int> kept_kfs;
  const auto note_kf = [&](int k) {
    if (k == 0) return;
    if (std::find(kept_kfs.begin(), kept_kfs.end(), k) == kept_kfs.end()) kept_kfs.push_back(k);
  };

  std::vector<int> marg_landmarks;
  for (size_t j = 0; j < window.landmarks.size(); ++j) {
    const auto& lm = window.landmarks[j];
    if (lm.anchor != 0 || lm.observations.empty()) continue;
    marg_landmarks.push_back(static_cast<int>(j));
    for (const auto& [kf, uv] : lm.observations) note_kf(kf);
  }

  bool have_factor = !marg_landmarks.empty();
  if (!window.links.empty()) {
    note_kf(1);
    have_factor = true;
  }
  for (const auto& f : window.ps_factors)
    if (f.kf == 0 && f.alpha > 0 && config.enable_ps_backend) have_factor = true;
  if (window.prior.has_value()) {
    bool touches = false;
    for (long id : window.prior->kf_ids) {
      for (int k = 0; k < window.size(); ++k) {
        if (window.ids[k] != id) continue;
        if (k == 0) touches = true;
        else note_kf(k);
      }
    }
    have_factor = have_factor || touches;
  }
  if (!have_factor) return std::nullopt;
  std::sort(kept_kfs.begin(), kept_kfs.end());

  // variable layout: [landmarks | kf0 | kept keyframes]
  const int n_lm = static_cast<int>(marg_landmarks.size());
  const int elim_dim = n_lm + kStateDim;
  const int total = elim_dim + kStateDim * static_cast<int>(kept_kfs.size());
  const auto col_of_kf = [&](int k) -> int {
    if (k == 0) return n_lm;
    const auto it = std::find(kept_kfs.begin(), kept_kfs.end(), k);
    return elim_dim + kStateDim * static_cast<int>(it - kept_kfs.begin());
  };

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total, total);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(total);

  const auto add_block = [&](int row, int col, const Eigen::MatrixXd& m) {
    H.block(row, col, m.rows(), m.cols()) += m;
  };

  // reprojection factors of landmarks anchored at kf0
  for (int idx = 0; idx < n_lm; ++idx) {
    const auto& lm = window.landmarks[marg_landmarks[idx]];
    for (const auto& [kf, uv] : lm.observations) {
      const auto eval = reprojection_residual(lm.inv_depth, window.states[0], window.states[kf],
                                              lm.anchor_uv, uv, window.cam_in_body);
      if (!eval.valid) continue;
      const double w = config.reprojection_info *
                       (lm.ps_corner ? config.ps_corner_info_scale : 1.0);
      const int ca = col_of_kf(0);
      const int co = col_of_kf(kf);
      const Eigen::MatrixXd Ja = eval.j_anchor, Jo = eval.j_observer;
      const Eigen::VectorXd Jl = eval.j_inv_depth;
      add_block(idx, idx, (w * Jl.transpose() * Jl));
      add_block(idx, ca, w * Jl.transpose() * Ja);
      add_block(ca, idx, w * Ja.transpose() * Jl);
      add_block(idx, co, w * Jl.transpose() * Jo);
      add_block(co, idx, w * Jo.transpose() * Jl);
      add_block(ca, ca, w * Ja.transpose() * Ja);
      add_block(co, co, w * Jo.transpose() * Jo);
      add_block(ca, co, w * Ja.transpose() * Jo);
      add_block(co, ca, w * Jo.transpose() * Ja);
      g.segment(idx, 1) += w * Jl.transpose() * eval.residual;
      g.segment<15>(ca) += w * Ja.transpose() * eval.residual;
      g.segment<15>(co) += w * Jo.transpose() * eval.residual;
    }
  }

  // first inertial link
  if (!window.links.empty()) {
    const auto eval = inertial_residual(window.states[0], window.states[1], window.links[0],
                                        window.link_sqrt_info[0]);
    const int c0 = col_of_kf(0);
    const int c1 = col_of_kf(1);
    add_block(c0, c0, eval.j_k.transpose() * eval.j_k);
    add_block(c1, c1, eval.j_k1.transpose() * eval.j_k1);
    add_block(c0, c1, eval.j_k.transpose() * eval.j_k1);
    add_block(c1, c0, eval.j_k1.transpose() * eval.j_k);
    g.segment<15>(c0) += eval.j_k.transpose() * eval.residual;
    g.segment<15>(c1) += eval.j_k1.transpose() * eval.residual;
  }

  // PS factors attached to kf0
  if (config.enable_ps_backend) {
    const double inv_sigma2 = 1.0 / (config.ps_sigma * config.ps_sigma);
    for (const auto& f : window.ps_factors) {
      if (f.kf != 0 || f.alpha <= 0) continue;
      const auto eval = ps_residual(window.states[0], f.center_body, f.anchor_world);
      const double scale = config.ps_weight_scale * f.alpha * inv_sigma2;
      const double s = scale * eval.residual.squaredNorm();
      const double w = robust_cost(s, config.cauchy_scale).weight * scale;
      const int c0 = col_of_kf(0);
      add_block(c0, c0, w * eval.j_k.transpose() * eval.j_k);
      g.segment<15>(c0) += w * eval.j_k.transpose() * eval.residual;
    }
  }

  // previous prior (absorbed whole)
  if (window.prior.has_value()) {
    std::vector<int> local;
    const Eigen::VectorXd r = detail::prior_residual(*window.prior, window, &local);
    const auto& J = window.prior->jacobian;
    for (size_t a = 0; a < local.size(); ++a) {
      const auto Ja = J.middleCols(15 * a, 15);
      g.segment<15>(col_of_kf(local[a])) += Ja.transpose() * r;
      for (size_t b = 0; b < local.size(); ++b) {
        const auto Jb = J.middleCols(15 * b, 15);
        add_block(col_of_kf(local[a]), col_of_kf(local[b]), Ja.transpose() * Jb);
      }
    }
  }

  const auto marg = schur_marginalize(H, g, elim_dim);
  if (clamped) *clamped = marg.clamped;
  if (marg.H.norm() < 1e-15) return std::nullopt;

  PriorFactor prior;
  auto [J, r0] = prior_square_root(marg.H, marg.g);
  prior.jacobian = std::move(J);
  prior.residual0 = std::move(r0);
  for (int k : kept_kfs) {
    prior.kf_ids.push_back(window.ids[k]);
    prior.lin.push_back(window.states[k]);
  }
  return prior;
}

}  // namespace parkvio
