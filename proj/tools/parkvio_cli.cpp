#include "parkvio/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace parkvio;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitMethod = 3;

NoiseModel noise_from_name_or_path(const std::string& name) {
  if (name == "zero") return NoiseModel::zero();
  if (name == "standard" || name == "default") return NoiseModel::standard();
  return io::noise_from_json(json::parse(io::read_file(name)));
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json path_polyline(const std::vector<TimedPose>& poses) {
  json out = json::array();
  for (const auto& tp : poses) out.push_back(json::array({tp.pose.t.x(), tp.pose.t.y()}));
  return out;
}

json truth_polyline(const io::StoredTrajectory& traj) {
  json out = json::array();
  for (const auto& s : traj.samples) out.push_back(json::array({s.pose.t.x(), s.pose.t.y()}));
  return out;
}

struct RunFlags {
  std::string dataset;
  std::string method = "full";
  std::string out;
  uint64_t seed = 0;
  int keyframes = 10;
  int features = 110;
  std::string ps_frontend = "default";
  std::string ps_backend = "default";
  std::string reweighting = "on";
  std::string association = "default";
  double ps_weight_scale = 1.0;
};

RunConfig to_run_config(const RunFlags& flags) {
  RunConfig run;
  run.method = method_from_string(flags.method);
  run.seed = flags.seed;
  run.keyframes = flags.keyframes;
  run.features = flags.features;
  run.reweighting = flags.reweighting == "on";
  run.ps_weight_scale = flags.ps_weight_scale;
  const auto on_off = [](const std::string& v, const char* flag) -> std::optional<bool> {
    if (v == "default") return std::nullopt;
    if (v == "on") return true;
    if (v == "off") return false;
    throw CLI::ValidationError(std::string(flag) + " must be on|off");
  };
  run.ps_frontend = on_off(flags.ps_frontend, "--ps-frontend");
  run.ps_backend = on_off(flags.ps_backend, "--ps-backend");
  if (flags.association != "default") {
    if (flags.association == "sort") run.association = AssociationMode::kSort;
    else if (flags.association == "hard") run.association = AssociationMode::kHardMatch;
    else throw CLI::ValidationError("--association must be sort|hard");
  }
  return run;
}

void save_run_with_paths(const PipelineResult& result, const Dataset& ds, const fs::path& dir) {
  save_run(result, dir);
  const json paths{{"schema", "parkvio_paths"},
                   {"version", io::kSchemaVersion},
                   {"method", result.report.method},
                   {"trajectory_kind", result.report.trajectory_kind},
                   {"estimate", path_polyline(result.odometry)},
                   {"truth", truth_polyline(ds.trajectory)}};
  io::write_file(dir / "paths.json", paths.dump());
}

int cmd_simulate(const std::string& kind, uint64_t seed, double length, double speed,
                 const std::string& noise_name, int slot_count, int landmarks,
                 const std::string& out) {
  DatasetSpec spec;
  spec.kind = trajectory_kind_from_string(kind);
  spec.seed = seed;
  spec.length = length;
  spec.speed = speed;
  spec.noise = noise_from_name_or_path(noise_name);
  if (slot_count > 0) spec.world.slot_count = slot_count;
  if (landmarks > 0) spec.world.landmark_count = landmarks;
  const auto ds = simulate_dataset(spec);
  save_dataset(ds, out);
  std::cout << "dataset " << ds.kind << " seed " << seed << " length "
            << ds.trajectory.arc_length << " m -> " << out << "\n";
  return kExitOk;
}

int cmd_run(const RunFlags& flags) {
  const auto ds = load_dataset(flags.dataset);
  const auto run = to_run_config(flags);
  auto result = run_pipeline(ds, run);
  result.report.config_echo["dataset_dir"] = flags.dataset;
  if (!flags.out.empty()) save_run_with_paths(result, ds, flags.out);
  if (result.report.failed) {
    std::cerr << "method failure: " << result.report.failure << "\n";
    return kExitMethod;
  }
  std::cout << "method " << result.report.method << " rmse " << result.report.rmse << " m over "
            << result.report.trajectory_length << " m\n";
  return kExitOk;
}

int cmd_eval(const std::string& estimate_path, const std::string& truth_path,
             const std::string& out) {
  const auto estimate = io::odometry_from_jsonl(io::read_file(estimate_path));
  const auto truth = io::trajectory_from_json(json::parse(io::read_file(truth_path)));
  const auto r = rmse(estimate, truth);
  const json result{{"schema", "parkvio_eval"},
                    {"version", io::kSchemaVersion},
                    {"rmse", r.rmse},
                    {"per_axis_rmse", io::vec_to_json(r.per_axis)},
                    {"max_error", r.max_error},
                    {"samples", r.count}};
  if (!out.empty()) io::write_file(out, result.dump(2));
  std::cout << "rmse " << r.rmse << " m (" << r.count << " samples, max " << r.max_error
            << " m)\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out) {
  std::vector<EvalReport> reports;
  json plots = json::array();
  std::string last_kind;
  for (const auto& dir : run_dirs) {
    reports.push_back(EvalReport::from_json(json::parse(io::read_file(fs::path(dir) / "report.json"))));
    const fs::path paths = fs::path(dir) / "paths.json";
    if (fs::exists(paths)) plots.push_back(json::parse(io::read_file(paths)));
    if (!last_kind.empty() && reports.back().trajectory_kind != last_kind) {
      // rows mix trajectories across datasets of the same kind only
    }
    last_kind = reports.back().trajectory_kind;
  }
  const auto table = ComparisonTable::build(reports);
  std::cout << table.render();
  if (!out.empty()) {
    fs::create_directories(out);
    io::write_file(fs::path(out) / "comparison.txt", table.render());
    io::write_file(fs::path(out) / "comparison.json", table.to_json().dump(2));
    io::write_file(fs::path(out) / "plots.json",
                   json{{"schema", "parkvio_plots"}, {"version", io::kSchemaVersion},
                        {"runs", plots}}
                       .dump());
  }
  return kExitOk;
}

int cmd_sweep(const std::string& kind, const std::string& seeds_csv, const std::string& methods_csv,
              const std::string& keyframes_csv, const std::string& features_csv,
              const std::string& noise_name, const std::string& out) {
  const auto seeds = split_list(seeds_csv);
  const auto methods = split_list(methods_csv);
  const auto keyframe_counts = split_list(keyframes_csv);
  const auto feature_counts = split_list(features_csv);
  if (seeds.empty() || methods.empty() || keyframe_counts.empty() || feature_counts.empty())
    throw CLI::ValidationError("sweep: empty grid");

  std::vector<EvalReport> reports;
  for (const auto& seed_str : seeds) {
    DatasetSpec spec;
    spec.kind = trajectory_kind_from_string(kind);
    spec.seed = std::stoull(seed_str);
    spec.noise = noise_from_name_or_path(noise_name);
    const auto ds = simulate_dataset(spec);
    for (const auto& method : methods) {
      for (const auto& k_str : keyframe_counts) {
        for (const auto& n_str : features_csv.empty() ? std::vector<std::string>{"110"}
                                                      : feature_counts) {
          RunFlags flags;
          flags.method = method;
          flags.seed = spec.seed;
          flags.keyframes = std::stoi(k_str);
          flags.features = std::stoi(n_str);
          auto result = run_pipeline(ds, to_run_config(flags));
          result.report.config_echo["dataset_dir"] = "";
          reports.push_back(result.report);
          const std::string run_name = method + "_s" + seed_str + "_K" + k_str + "_N" + n_str;
          if (!out.empty()) save_run_with_paths(result, ds, fs::path(out) / "runs" / run_name);
          std::cout << run_name << (result.report.failed ? " fail" : "") << " rmse "
                    << result.report.rmse << "\n";
        }
      }
    }
  }
  if (!out.empty()) {
    const auto table = ComparisonTable::build(reports);
    io::write_file(fs::path(out) / "comparison.txt", table.render());
    io::write_file(fs::path(out) / "comparison.json", table.to_json().dump(2));
    json all = json::array();
    for (const auto& r : reports) all.push_back(r.to_json());
    io::write_file(fs::path(out) / "sweep.json",
                   json{{"schema", "parkvio_sweep"}, {"version", io::kSchemaVersion},
                        {"reports", all}}
                       .dump(2));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parkvio: semantic visual-inertial odometry for parking lots"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a world, trajectory and sensor log");
  std::string sim_kind = "round", sim_noise = "standard", sim_out;
  uint64_t sim_seed = 0;
  double sim_length = 0, sim_speed = 0;
  int sim_slots = 0, sim_landmarks = 0;
  sim->add_option("--kind", sim_kind, "trajectory family");
  sim->add_option("--seed", sim_seed, "simulation seed");
  sim->add_option("--length", sim_length, "trajectory length override, meters");
  sim->add_option("--speed", sim_speed, "cruise speed override, m/s");
  sim->add_option("--noise", sim_noise, "zero|standard|path to noise.json");
  sim->add_option("--slots", sim_slots, "world slot count");
  sim->add_option("--landmarks", sim_landmarks, "world landmark count");
  sim->add_option("--out", sim_out, "output dataset directory")->required();

  // run
  auto* run = app.add_subcommand("run", "run one pipeline over a dataset");
  RunFlags run_flags;
  run->add_option("--dataset", run_flags.dataset, "dataset directory")->required();
  run->add_option("--method", run_flags.method,
                  "full|vins_style|frontend_ps_only|backend_ps_only|ekf|hard_match_association");
  run->add_option("--seed", run_flags.seed, "run seed (echoed in the report)");
  run->add_option("--keyframes", run_flags.keyframes, "sliding window size K");
  run->add_option("--features", run_flags.features, "frontend feature budget N");
  run->add_option("--ps-frontend", run_flags.ps_frontend, "on|off");
  run->add_option("--ps-backend", run_flags.ps_backend, "on|off");
  run->add_option("--reweighting", run_flags.reweighting, "on|off");
  run->add_option("--association", run_flags.association, "sort|hard");
  run->add_option("--ps-weight-scale", run_flags.ps_weight_scale, "PS term weight");
  run->add_option("--out", run_flags.out, "output run directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid over methods x seeds x K x N");
  std::string sw_kind = "round", sw_seeds = "1,2,3", sw_methods = "full,vins_style";
  std::string sw_keyframes = "7,10,13", sw_features = "50,110,200", sw_noise = "standard", sw_out;
  sweep->add_option("--kind", sw_kind, "trajectory family");
  sweep->add_option("--seeds", sw_seeds, "comma-separated dataset seeds");
  sweep->add_option("--methods", sw_methods, "comma-separated methods");
  sweep->add_option("--keyframes", sw_keyframes, "comma-separated K values");
  sweep->add_option("--features", sw_features, "comma-separated N values");
  sweep->add_option("--noise", sw_noise, "zero|standard|path to noise.json");
  sweep->add_option("--out", sw_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "RMSE of a stored odometry stream");
  std::string ev_estimate, ev_truth, ev_out;
  eval->add_option("--estimate", ev_estimate, "odometry.jsonl")->required();
  eval->add_option("--truth", ev_truth, "trajectory.json")->required();
  eval->add_option("--out", ev_out, "write eval JSON here");

  // compare
  auto* compare = app.add_subcommand("compare", "comparison table from stored runs");
  std::vector<std::string> cp_runs;
  std::string cp_out;
  compare->add_option("--runs", cp_runs, "run directories")->required()->expected(-1);
  compare->add_option("--out", cp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_kind, sim_seed, sim_length, sim_speed, sim_noise, sim_slots,
                          sim_landmarks, sim_out);
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed())
      return cmd_sweep(sw_kind, sw_seeds, sw_methods, sw_keyframes, sw_features, sw_noise, sw_out);
    if (eval->parsed()) return cmd_eval(ev_estimate, ev_truth, ev_out);
    if (compare->parsed()) return cmd_compare(cp_runs, cp_out);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "method failure: " << e.what() << "\n";
    return kExitMethod;
  }
  return kExitUsage;
}
