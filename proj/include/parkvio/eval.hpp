#pragma once

#include "parkvio/ekf.hpp"
#include "parkvio/estimator.hpp"
#include "parkvio/io.hpp"

#include <map>
#include <string>
#include <vector>

namespace parkvio {

struct RmseResult {
  double rmse = 0;
  Vec3 per_axis{0, 0, 0};  // per-axis RMSE
  double max_error = 0;
  int count = 0;
};

// Position RMSE of the estimate against densely sampled ground truth,
// linearly interpolated at the estimate timestamps. No alignment transform:
// estimate and truth share the world frame fixed at initialization.
template <typename TruthAt>
RmseResult rmse_against(const std::vector<TimedPose>& estimate, const TruthAt& truth_at,
                        double t_min, double t_max) {
  RmseResult out;
  Vec3 sq_sum = Vec3::Zero();
  for (const auto& tp : estimate) {
    if (tp.t < t_min - 1e-9 || tp.t > t_max + 1e-9) continue;
    const Vec3 err = tp.pose.t - truth_at(tp.t);
    sq_sum += err.cwiseProduct(err);
    out.max_error = std::max(out.max_error, err.norm());
    out.count += 1;
  }
  if (out.count == 0) throw DataError("rmse: no overlapping samples between estimate and truth");
  out.per_axis = (sq_sum / out.count).cwiseSqrt();
  out.rmse = std::sqrt(sq_sum.sum() / out.count);
  return out;
}

inline RmseResult rmse(const std::vector<TimedPose>& estimate,
                       const io::StoredTrajectory& truth) {
  if (truth.samples.empty()) throw DataError("rmse: empty truth");
  return rmse_against(
      estimate, [&](double t) { return truth.at(t).pose.t; }, truth.samples.front().t,
      truth.samples.back().t);
}

// An id switch: a ground-truth slot matched in two consecutive BEV frames
// with different assigned ids. Re-identification after a tracking gap is
// counted separately (gaps come from occlusion or leaving the view).
inline int count_id_switches(const std::vector<AssociationRow>& rows, double frame_period = 0.1) {
  std::map<int, std::pair<double, int>> last;  // gt slot -> (t, id)
  int switches = 0;
  for (const auto& r : rows) {
    const auto it = last.find(r.gt_slot_id);
    if (it != last.end() && r.t - it->second.first < 1.5 * frame_period &&
        it->second.second != r.assigned_id)
      switches += 1;
    last[r.gt_slot_id] = {r.t, r.assigned_id};
  }
  return switches;
}

struct EvalReport {
  std::string method;
  std::string trajectory_kind;
  uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double rmse = 0;
  Vec3 per_axis_rmse{0, 0, 0};
  double max_error = 0;
  double trajectory_length = 0;
  double runtime_seconds = 0;  // excluded from determinism comparisons
  int keyframes = 0;
  int solves = 0;
  int id_switches = 0;
  int duplicate_slots = 0;
  json config_echo;

  json to_json() const {
    return json{{"schema", "parkvio_report"},
                {"version", io::kSchemaVersion},
                {"method", method},
                {"trajectory_kind", trajectory_kind},
                {"seed", seed},
                {"failed", failed},
                {"failure", failure},
                {"rmse", failed ? json() : json(rmse)},
                {"per_axis_rmse", io::vec_to_json(per_axis_rmse)},
                {"max_error", max_error},
                {"trajectory_length", trajectory_length},
                {"runtime_seconds", runtime_seconds},
                {"keyframes", keyframes},
                {"solves", solves},
                {"id_switches", id_switches},
                {"duplicate_slots", duplicate_slots},
                {"config", config_echo}};
  }

  static EvalReport from_json(const json& j) {
    io::require_schema(j, "parkvio_report");
    EvalReport r;
    r.method = j.at("method");
    r.trajectory_kind = j.at("trajectory_kind");
    r.seed = j.at("seed");
    r.failed = j.at("failed");
    r.failure = j.at("failure");
    if (!j.at("rmse").is_null()) r.rmse = j.at("rmse");
    r.per_axis_rmse = io::vec3_from_json(j.at("per_axis_rmse"));
    r.max_error = j.at("max_error");
    r.trajectory_length = j.at("trajectory_length");
    r.runtime_seconds = j.at("runtime_seconds");
    r.keyframes = j.at("keyframes");
    r.solves = j.at("solves");
    r.id_switches = j.at("id_switches");
    r.duplicate_slots = j.at("duplicate_slots");
    r.config_echo = j.at("config");
    return r;
  }
};

// rows = trajectory kinds, columns = methods, cells = mean RMSE over seeds;
// failed runs render "fail" and are excluded from the mean.
struct ComparisonTable {
  std::vector<std::string> methods;
  std::vector<std::string> trajectories;
  std::map<std::string, std::map<std::string, std::vector<EvalReport>>> cells;

  static ComparisonTable build(const std::vector<EvalReport>& reports) {
    ComparisonTable t;
    for (const auto& r : reports) {
      if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end())
        t.methods.push_back(r.method);
      if (std::find(t.trajectories.begin(), t.trajectories.end(), r.trajectory_kind) ==
          t.trajectories.end())
        t.trajectories.push_back(r.trajectory_kind);
      t.cells[r.trajectory_kind][r.method].push_back(r);
    }
    return t;
  }

  std::string cell_text(const std::string& traj, const std::string& method) const {
    const auto ti = cells.find(traj);
    if (ti == cells.end()) return "-";
    const auto mi = ti->second.find(method);
    if (mi == ti->second.end()) return "-";
    double sum = 0;
    int n = 0;
    int failed = 0;
    for (const auto& r : mi->second) {
      if (r.failed) {
        failed += 1;
        continue;
      }
      sum += r.rmse;
      n += 1;
    }
    if (n == 0) return failed > 0 ? "fail" : "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", sum / n);
    std::string text(buf);
    if (failed > 0) text += "*";  // some seeds failed
    return text;
  }

  std::string render() const {
    std::ostringstream out;
    size_t width = 12;
    for (const auto& m : methods) width = std::max(width, m.size() + 2);
    out << std::string(16, ' ');
    for (const auto& m : methods) out << std::setw(static_cast<int>(width)) << m;
    out << "\n";
    for (const auto& traj : trajectories) {
      out << std::setw(16) << std::left << traj << std::right;
      for (const auto& m : methods) out << std::setw(static_cast<int>(width)) << cell_text(traj, m);
      out << "\n";
    }
    return out.str();
  }

  json to_json() const {
    json rows = json::array();
    for (const auto& traj : trajectories) {
      json row{{"trajectory", traj}};
      json by_method = json::object();
      for (const auto& m : methods) {
        const auto ti = cells.find(traj);
        if (ti == cells.end()) continue;
        const auto mi = ti->second.find(m);
        if (mi == ti->second.end()) continue;
        json seeds = json::array();
        for (const auto& r : mi->second)
          seeds.push_back(r.failed ? json("fail") : json(r.rmse));
        by_method[m] = seeds;
      }
      row["rmse"] = by_method;
      rows.push_back(row);
    }
    return json{{"schema", "parkvio_comparison"}, {"version", io::kSchemaVersion}, {"rows", rows}};
  }
};

}  // namespace parkvio
