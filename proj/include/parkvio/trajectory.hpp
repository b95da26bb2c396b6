#pragma once

#include "parkvio/geom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace parkvio {

enum class TrajectoryKind {
  kStraight0,
  kLeft45,
  kRight45,
  kLeft90,
  kRight90,
  kLeftParallel,
  kRightParallel,
  kRound,
};

inline const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kStraight0: return "straight0";
    case TrajectoryKind::kLeft45: return "left45";
    case TrajectoryKind::kRight45: return "right45";
    case TrajectoryKind::kLeft90: return "left90";
    case TrajectoryKind::kRight90: return "right90";
    case TrajectoryKind::kLeftParallel: return "left_parallel";
    case TrajectoryKind::kRightParallel: return "right_parallel";
    case TrajectoryKind::kRound: return "round";
  }
  return "unknown";
}

inline TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  for (auto k : {TrajectoryKind::kStraight0, TrajectoryKind::kLeft45, TrajectoryKind::kRight45,
                 TrajectoryKind::kLeft90, TrajectoryKind::kRight90, TrajectoryKind::kLeftParallel,
                 TrajectoryKind::kRightParallel, TrajectoryKind::kRound}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown trajectory kind: " + s);
}

inline bool is_long_distance(TrajectoryKind k) { return k == TrajectoryKind::kRound; }

// Paper-matched defaults: ~4 km/h short-distance maneuvers, ~10 km/h loops.
inline double default_speed(TrajectoryKind k) { return is_long_distance(k) ? 2.78 : 1.11; }

inline double default_length(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kStraight0: return 4.94;
    case TrajectoryKind::kLeft45: return 5.95;
    case TrajectoryKind::kRight45: return 10.92;
    case TrajectoryKind::kLeft90: return 11.29;
    case TrajectoryKind::kRight90: return 10.24;
    case TrajectoryKind::kLeftParallel: return 8.25;
    case TrajectoryKind::kRightParallel: return 13.08;
    case TrajectoryKind::kRound: return 121.62;
  }
  return 10.0;
}

struct TrajectoryParams {
  TrajectoryKind kind = TrajectoryKind::kStraight0;
  double length = 0.0;        // meters; 0 = use default_length(kind)
  double speed = 0.0;         // m/s; 0 = use default_speed(kind)
  double sample_rate = 200.0; // Hz
  Vec2 start{4.0, 9.0};
  double start_yaw = 0.0;
  double dwell_time = 2.0;    // parked before moving
  double ramp_time = 1.6;     // speed-up to cruise
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
  Vec3 velocity{0, 0, 0};          // world frame m/s
  Vec3 angular_velocity{0, 0, 0};  // body frame rad/s (planar: z only)
  Vec3 acceleration{0, 0, 0};      // world frame m/s^2
};

namespace detail {

// Piecewise-smooth scalar profile: constant pieces joined by smoothstep
// blends, with a closed-form running integral. Used for both the yaw rate
// (integral = heading) and the speed (integral = arc length).
struct ProfilePiece {
  double t0 = 0, t1 = 0;
  double w0 = 0, w1 = 0;   // value at piece ends (equal for const pieces)
  double acc0 = 0;         // accumulated integral at t0
};

class SmoothProfile {
 public:
  void add(double duration, double w_from, double w_to) {
    if (duration <= 0) return;
    ProfilePiece p;
    p.t0 = end_time_;
    p.t1 = end_time_ + duration;
    p.w0 = w_from;
    p.w1 = w_to;
    p.acc0 = end_acc_;
    end_time_ = p.t1;
    end_acc_ += piece_integral(p, p.t1);
    pieces_.push_back(p);
  }

  void add_const(double duration, double w) { add(duration, w, w); }
  void add_blend(double duration, double w_from, double w_to) { add(duration, w_from, w_to); }

  double duration() const { return end_time_; }
  double total_integral() const { return end_acc_; }

  double value(double t) const {
    const ProfilePiece& p = find(t);
    const double d = p.t1 - p.t0;
    const double u = std::clamp((t - p.t0) / d, 0.0, 1.0);
    const double s = u * u * (3.0 - 2.0 * u);
    return p.w0 + (p.w1 - p.w0) * s;
  }

  double slope(double t) const {
    const ProfilePiece& p = find(t);
    const double d = p.t1 - p.t0;
    const double u = std::clamp((t - p.t0) / d, 0.0, 1.0);
    return (p.w1 - p.w0) * 6.0 * u * (1.0 - u) / d;
  }

  double integral(double t) const {
    const ProfilePiece& p = find(t);
    return p.acc0 + piece_integral(p, t);
  }

  bool empty() const { return pieces_.empty(); }

 private:
  static double piece_integral(const ProfilePiece& p, double t) {
    const double d = p.t1 - p.t0;
    const double u = std::clamp((t - p.t0) / d, 0.0, 1.0);
    const double u3 = u * u * u;
    return d * (p.w0 * u + (p.w1 - p.w0) * (u3 - 0.5 * u3 * u));
  }

  const ProfilePiece& find(double t) const {
    if (pieces_.empty()) throw std::logic_error("empty profile");
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double v, const ProfilePiece& p) { return v < p.t1; });
    if (it == pieces_.end()) return pieces_.back();
    return *it;
  }

  std::vector<ProfilePiece> pieces_;
  double end_time_ = 0.0;
  double end_acc_ = 0.0;
};

}  // namespace detail

class GroundTruthTrajectory {
 public:
  GroundTruthTrajectory(TrajectoryKind kind, detail::SmoothProfile yaw_rate,
                        detail::SmoothProfile speed, Vec2 start, double start_yaw,
                        double sample_rate)
      : kind_(kind), yaw_(std::move(yaw_rate)), speed_(std::move(speed)), start_(start),
        start_yaw_(start_yaw) {
    if (yaw_.duration() <= 0 || speed_.duration() <= 0)
      throw std::invalid_argument("trajectory duration must be > 0");
    const double dt = 1.0 / sample_rate;
    const int n = static_cast<int>(std::round(duration() * sample_rate));
    sample_times_.reserve(n + 1);
    positions_.reserve(n + 1);
    Vec2 p = start_;
    sample_times_.push_back(0.0);
    positions_.push_back(p);
    for (int i = 0; i < n; ++i) {
      p = integrate_position(p, i * dt, std::min((i + 1) * dt, duration()));
      sample_times_.push_back(std::min((i + 1) * dt, duration()));
      positions_.push_back(p);
    }
  }

  TrajectoryKind kind() const { return kind_; }
  double duration() const { return std::max(yaw_.duration(), speed_.duration()); }
  double arc_length() const { return speed_.total_integral(); }
  double speed() const { return cruise_speed_; }
  void set_cruise_speed(double v) { cruise_speed_ = v; }
  size_t sample_count() const { return sample_times_.size(); }

  TrajectorySample at(double t) const {
    t = std::clamp(t, 0.0, duration());
    TrajectorySample s;
    s.t = t;
    const double th = start_yaw_ + yaw_.integral(t);
    const double w = yaw_.value(t);
    const double v = speed_.value(t);
    const double vdot = speed_.slope(t);
    const Vec2 heading(std::cos(th), std::sin(th));
    const Vec2 left(-heading.y(), heading.x());
    // locate the bracketing stored sample and integrate the remainder
    const double rate = (sample_times_.size() - 1) / duration();
    int idx = std::min(static_cast<int>(t * rate), static_cast<int>(sample_times_.size()) - 1);
    Vec2 p = integrate_position(positions_[idx], sample_times_[idx], t);
    s.pose = Pose::from_yaw(th, Vec3(p.x(), p.y(), 0.0));
    s.velocity = v * Vec3(heading.x(), heading.y(), 0.0);
    s.angular_velocity = Vec3(0, 0, w);
    // tangential plus centripetal
    s.acceleration = vdot * Vec3(heading.x(), heading.y(), 0.0) +
                     v * w * Vec3(left.x(), left.y(), 0.0);
    return s;
  }

  std::vector<TrajectorySample> sampled() const {
    std::vector<TrajectorySample> out;
    out.reserve(sample_times_.size());
    for (size_t i = 0; i < sample_times_.size(); ++i) {
      TrajectorySample s = at(sample_times_[i]);
      // use the precomputed position to avoid re-integration cost
      s.pose.t = Vec3(positions_[i].x(), positions_[i].y(), 0.0);
      out.push_back(s);
    }
    return out;
  }

 private:
  // Gauss-Legendre 5-point quadrature of v(t) (cos theta, sin theta).
  Vec2 integrate_position(Vec2 p, double t0, double t1) const {
    static const double xs[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                 0.5384693101056831, 0.9061798459386640};
    static const double ws[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    const double h = 0.5 * (t1 - t0);
    const double c = 0.5 * (t0 + t1);
    Vec2 acc(0, 0);
    for (int i = 0; i < 5; ++i) {
      const double t = c + h * xs[i];
      const double th = start_yaw_ + yaw_.integral(t);
      acc += ws[i] * speed_.value(t) * Vec2(std::cos(th), std::sin(th));
    }
    return p + h * acc;
  }

  TrajectoryKind kind_;
  detail::SmoothProfile yaw_;
  detail::SmoothProfile speed_;
  double cruise_speed_ = 0;
  Vec2 start_;
  double start_yaw_;
  std::vector<double> sample_times_;
  std::vector<Vec2> positions_;
};

namespace detail {

// A planned turn: smoothstep rise over tau, constant hold, smoothstep fall.
// The integral of the rate profile equals the requested angle exactly.
struct TurnPlan {
  double rate = 0;  // signed peak yaw rate
  double hold = 0;
  double tau = 0;
  double time() const { return 2 * tau + hold; }
};

inline TurnPlan plan_turn(double angle, double desired_radius, double speed, double tau) {
  TurnPlan plan;
  plan.tau = tau;
  double w = speed / desired_radius;
  double hold = std::abs(angle) / w - tau;
  if (hold < 0.2) {
    hold = 0.2;
    w = std::abs(angle) / (tau + hold);
  }
  plan.rate = (angle >= 0 ? 1.0 : -1.0) * w;
  plan.hold = hold;
  return plan;
}

inline void append_turn(SmoothProfile& profile, const TurnPlan& plan) {
  profile.add_blend(plan.tau, 0.0, plan.rate);
  profile.add_const(plan.hold, plan.rate);
  profile.add_blend(plan.tau, plan.rate, 0.0);
}

}  // namespace detail

inline GroundTruthTrajectory generate_trajectory(const TrajectoryParams& params) {
  if (params.length < 0 || params.speed < 0 || params.dwell_time < 0 || params.ramp_time < 0)
    throw std::invalid_argument("generate_trajectory: negative parameter");
  const double speed = params.speed > 0 ? params.speed : default_speed(params.kind);
  const double length = params.length > 0 ? params.length : default_length(params.kind);
  if (length <= 0 || speed <= 0)
    throw std::invalid_argument("generate_trajectory: degenerate duration");

  // distance covered during the ramp is v * ramp / 2, the rest at cruise
  const double ramp = std::min(params.ramp_time, 0.8 * length / speed);
  const double cruise_time = (length - 0.5 * speed * ramp) / speed;
  if (cruise_time <= 0.2)
    throw std::invalid_argument("generate_trajectory: length too short for the speed profile");
  const double lead_in = params.dwell_time + ramp;

  const double tau = std::min(0.6, 0.08 * cruise_time);
  detail::SmoothProfile yaw;
  yaw.add_const(lead_in, 0.0);

  const auto fit_radius = [&](double angle, double desired_radius, double budget) {
    // shrink the radius until the turn fits its time budget
    double r = desired_radius;
    detail::TurnPlan plan = detail::plan_turn(angle, r, speed, tau);
    while (plan.time() > budget && r > 0.5) {
      r *= 0.8;
      plan = detail::plan_turn(angle, r, speed, tau);
    }
    return plan;
  };

  switch (params.kind) {
    case TrajectoryKind::kStraight0:
      yaw.add_const(cruise_time, 0.0);
      break;
    case TrajectoryKind::kLeft45:
    case TrajectoryKind::kRight45:
    case TrajectoryKind::kLeft90:
    case TrajectoryKind::kRight90: {
      const bool left = params.kind == TrajectoryKind::kLeft45 || params.kind == TrajectoryKind::kLeft90;
      const bool is45 = params.kind == TrajectoryKind::kLeft45 || params.kind == TrajectoryKind::kRight45;
      const double angle = (is45 ? M_PI / 4.0 : M_PI / 2.0) * (left ? 1.0 : -1.0);
      const auto plan = fit_radius(angle, 4.0, 0.75 * cruise_time);
      if (plan.time() >= cruise_time)
        throw std::invalid_argument("generate_trajectory: length too short for the turn");
      const double lead = 0.5 * (cruise_time - plan.time());
      yaw.add_const(lead, 0.0);
      detail::append_turn(yaw, plan);
      yaw.add_const(cruise_time - lead - plan.time(), 0.0);
      break;
    }
    case TrajectoryKind::kLeftParallel:
    case TrajectoryKind::kRightParallel: {
      const double sign = params.kind == TrajectoryKind::kLeftParallel ? 1.0 : -1.0;
      const double swing = sign * 35.0 * M_PI / 180.0;
      const auto plan_in = fit_radius(swing, 3.0, 0.35 * cruise_time);
      const auto plan_out = fit_radius(-swing, 3.0, 0.35 * cruise_time);
      const double turns = plan_in.time() + plan_out.time();
      if (turns >= 0.9 * cruise_time)
        throw std::invalid_argument("generate_trajectory: length too short for parallel maneuver");
      const double straight_total = cruise_time - turns;
      yaw.add_const(0.4 * straight_total, 0.0);
      detail::append_turn(yaw, plan_in);
      yaw.add_const(0.2 * straight_total, 0.0);
      detail::append_turn(yaw, plan_out);
      yaw.add_const(0.4 * straight_total, 0.0);
      break;
    }
    case TrajectoryKind::kRound: {
      // rectangle loop with four 90 degree left turns, long:short sides 2:1
      const auto plan = detail::plan_turn(M_PI / 2.0, 4.0, speed, tau);
      const double straight_total = cruise_time - 4 * plan.time();
      if (straight_total <= 0.4)
        throw std::invalid_argument("generate_trajectory: round length too short for loop");
      const double a = straight_total / 3.0;
      const double sides[4] = {a, 0.5 * a, a, 0.5 * a};
      for (int i = 0; i < 4; ++i) {
        yaw.add_const(sides[i], 0.0);
        detail::append_turn(yaw, plan);
      }
      break;
    }
  }

  detail::SmoothProfile speed_profile;
  if (params.dwell_time > 0) speed_profile.add_const(params.dwell_time, 0.0);
  if (ramp > 0) speed_profile.add_blend(ramp, 0.0, speed);
  speed_profile.add_const(cruise_time, speed);

  GroundTruthTrajectory traj(params.kind, std::move(yaw), std::move(speed_profile), params.start,
                             params.start_yaw, params.sample_rate);
  traj.set_cruise_speed(speed);
  return traj;
}

}  // namespace parkvio
