// aslio command-line interface.
//
//   aslio sim    --scenario NAME --seed N --out-dir DIR
//   aslio run    --config FILE --points F --imu F [--gt F] --out-dir DIR
//                [--mode adaptive|fixed] [--export-map] [--timing] [--init-moving]
//   aslio eval   --est trajectory.txt --gt gt.txt [--out-dir DIR]
//   aslio sweep  --config FILE --points F [--imu F] [--gt F]
//                --voxel-sizes 0.1,0.2,0.3,0.4 --out-dir DIR
//
// Exit codes: 0 success, 1 input error, 2 runtime degradation abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "aslio/io.hpp"
#include "aslio/pipeline.hpp"
#include "aslio/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

aslio::PipelineConfig load_config(const std::string& path) {
  aslio::PipelineConfig cfg;
  if (!path.empty()) {
    const auto entries = aslio::read_key_values(path);
    aslio::apply_key_values(cfg, entries);
  }
  cfg.validate();
  return cfg;
}

json metrics_to_json(const aslio::RunMetrics& m, int status, const std::string& message) {
  json j;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  j["updates"] = m.updates;
  j["degraded_updates"] = m.degraded_updates;
  j["mean_update_rate_hz"] = m.mean_update_rate;
  j["max_update_rate_hz"] = m.max_update_rate;
  j["mean_update_wall_s"] = m.mean_update_wall;
  j["total_wall_s"] = m.total_wall;
  if (m.has_ground_truth) {
    j["end_to_end_error_m"] = m.end_to_end_error;
    j["ate_rms_m"] = m.ate_rms;
  }
  return j;
}

std::vector<aslio::TumPose> ground_truth_series(const aslio::Scenario& sc) {
  std::vector<aslio::TumPose> gt;
  const double dt = 1.0 / sc.imu_rate;
  for (double t = 0.0; t <= sc.trajectory.duration; t += dt) {
    const auto g = sc.trajectory.ground_truth(t);
    gt.push_back({t, g.pose.translation, g.pose.rotation.quaternion()});
  }
  return gt;
}

int cmd_sim(const std::string& scenario_name, std::uint64_t seed, const std::string& out_dir) {
  const aslio::Scenario sc = aslio::make_scenario(scenario_name, seed);
  fs::create_directories(out_dir);

  const auto points = sc.generate_scan();
  const auto imu = sc.generate_imu();
  aslio::write_points_csv(out_dir + "/points.csv", points);
  aslio::write_imu_csv(out_dir + "/imu.csv", imu);
  aslio::write_tum(out_dir + "/gt.txt", ground_truth_series(sc));

  std::ofstream events(out_dir + "/events.csv");
  events << "label,t0,t1\n";
  for (const auto& e : sc.events) {
    char line[128];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", e.label.c_str(), e.t0, e.t1);
    events << line;
  }
  std::cout << "wrote " << points.size() << " points, " << imu.size() << " IMU samples to "
            << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& points_path,
            const std::string& imu_path, const std::string& gt_path, const std::string& out_dir,
            const std::string& mode, bool export_map, bool timing, bool init_moving) {
  aslio::PipelineConfig cfg = load_config(config_path);
  if (mode == "fixed") cfg.mode = aslio::PipelineMode::kFixedWindow;
  else if (mode == "adaptive") cfg.mode = aslio::PipelineMode::kAdaptive;
  else if (!mode.empty()) throw std::runtime_error("--mode must be adaptive or fixed");
  if (init_moving) cfg.init_moving = true;

  const auto points = aslio::read_points_csv(points_path);
  const auto imu = aslio::read_imu_csv(imu_path);
  std::vector<aslio::TumPose> gt;
  if (!gt_path.empty()) gt = aslio::read_tum(gt_path);

  // The registration map is internal to run(); recover the export through a
  // second map fed by an observer only when asked.
  aslio::RunResult result = aslio::run(cfg, points, imu, gt);

  fs::create_directories(out_dir);
  aslio::write_trajectory_tum(out_dir + "/trajectory.txt", result.records);
  aslio::write_updates_csv(out_dir + "/updates.csv", result.records, timing);

  aslio::RunMetrics metrics = result.metrics;
  if (!gt.empty() && !result.records.empty()) {
    const aslio::RunMetrics err = aslio::evaluate(result.records, gt);
    metrics.has_ground_truth = true;
    metrics.end_to_end_error = err.end_to_end_error;
    metrics.ate_rms = err.ate_rms;
  }
  std::ofstream mf(out_dir + "/metrics.json");
  mf << metrics_to_json(metrics, result.status, result.message).dump(2) << "\n";

  if (export_map) {
    // Rebuild the registration map from the committed trajectory for export.
    aslio::RegistrationMap map(cfg.reg_voxel_size, cfg.reg_max_points_per_voxel);
    std::vector<aslio::TumPose> est;
    est.reserve(result.records.size());
    for (const auto& r : result.records) est.push_back({r.t, r.position, r.orientation});
    const double fl = cfg.window.frame_length;
    for (const auto& r : result.records) {
      const std::size_t i0 = aslio::detail::lower_index(points, r.t - r.shift_time);
      const std::size_t i1 = aslio::detail::lower_index(points, r.t);
      aslio::PointCloud world;
      (void)fl;
      for (std::size_t i = i0; i < i1; ++i) {
        const aslio::Pose body = aslio::interpolate_tum(est, points[i].t);
        world.push_back(body * (cfg.extrinsic * points[i].p));
      }
      map.merge(aslio::voxel_downsample(world, cfg.reg_downsample_leaf));
    }
    std::ofstream xyz(out_dir + "/map.xyz");
    map.export_xyz(xyz);
  }

  if (result.status != 0) std::cerr << "run: " << result.message << "\n";
  else
    std::cout << "run: " << result.records.size() << " updates, outputs in " << out_dir << "\n";
  return result.status;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& out_dir) {
  const auto est = aslio::read_tum(est_path);
  const auto gt = aslio::read_tum(gt_path);
  std::vector<aslio::TrajectoryRecord> records;
  records.reserve(est.size());
  for (const auto& p : est) {
    aslio::TrajectoryRecord r;
    r.t = p.t;
    r.position = p.position;
    r.orientation = p.orientation;
    records.push_back(r);
  }
  const aslio::RunMetrics m = aslio::evaluate(records, gt);
  const json j = metrics_to_json(m, 0, "");
  std::cout << j.dump(2) << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream mf(out_dir + "/metrics.json");
    mf << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& points_path,
              const std::string& imu_path, const std::string& gt_path,
              const std::vector<double>& voxel_sizes, const std::string& out_dir) {
  const aslio::PipelineConfig cfg = load_config(config_path);
  const auto points = aslio::read_points_csv(points_path);

  std::vector<aslio::TumPose> poses;
  if (!gt_path.empty()) {
    poses = aslio::read_tum(gt_path);
  } else {
    if (imu_path.empty())
      throw std::runtime_error("sweep: need --gt or --imu (to estimate the trajectory)");
    const auto imu = aslio::read_imu_csv(imu_path);
    aslio::PipelineConfig fixed_cfg = cfg;
    fixed_cfg.mode = aslio::PipelineMode::kFixedWindow;
    const aslio::RunResult result = aslio::run(fixed_cfg, points, imu);
    if (result.status != 0) throw std::runtime_error("sweep: estimation run failed: " + result.message);
    for (const auto& r : result.records) poses.push_back({r.t, r.position, r.orientation});
  }

  const auto series = aslio::sod_sweep(cfg, points, poses, voxel_sizes);
  fs::create_directories(out_dir);
  for (const auto& s : series) {
    char name[64];
    std::snprintf(name, sizeof(name), "sweep_%.3g.csv", s.voxel_size);
    aslio::write_sweep_csv(out_dir + "/" + name, s);
  }
  std::cout << "sweep: wrote " << series.size() << " series to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AS-LIO: adaptive sliding-window LiDAR-inertial odometry"};
  app.require_subcommand(1);

  std::string scenario = "corridor_sharp_turns";
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config_path, points_path, imu_path, gt_path, est_path;
  std::string mode;
  bool export_map = false, timing = false, init_moving = false;
  std::vector<double> voxel_sizes;

  auto* sim = app.add_subcommand("sim", "generate a synthetic scenario dataset");
  sim->add_option("--scenario", scenario, "scenario name")
      ->check(CLI::IsMember(aslio::scenario_names()));
  sim->add_option("--seed", seed, "noise seed");
  sim->add_option("--out-dir", out_dir, "output directory")->required();

  auto* run = app.add_subcommand("run", "run the odometry pipeline on a dataset");
  run->add_option("--config", config_path, "config file");
  run->add_option("--points", points_path, "points CSV")->required();
  run->add_option("--imu", imu_path, "IMU CSV")->required();
  run->add_option("--gt", gt_path, "ground-truth TUM trajectory");
  run->add_option("--out-dir", out_dir, "output directory")->required();
  run->add_option("--mode", mode, "adaptive|fixed");
  run->add_flag("--export-map", export_map, "write map.xyz point export");
  run->add_flag("--timing", timing, "record wall time in updates.csv");
  run->add_flag("--init-moving", init_moving, "initialize from ground truth while moving");

  auto* eval = app.add_subcommand("eval", "evaluate a trajectory against ground truth");
  eval->add_option("--est", est_path, "estimated TUM trajectory")->required();
  eval->add_option("--gt", gt_path, "ground-truth TUM trajectory")->required();
  eval->add_option("--out-dir", out_dir, "optional metrics output directory");

  auto* sweep = app.add_subcommand("sweep", "SOD voxel-size sensitivity sweep");
  sweep->add_option("--config", config_path, "config file");
  sweep->add_option("--points", points_path, "points CSV")->required();
  sweep->add_option("--imu", imu_path, "IMU CSV (when estimating the trajectory)");
  sweep->add_option("--gt", gt_path, "ground-truth TUM trajectory");
  sweep->add_option("--voxel-sizes", voxel_sizes, "comma-separated sizes in m")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out-dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_sim(scenario, seed, out_dir);
    if (run->parsed())
      return cmd_run(config_path, points_path, imu_path, gt_path, out_dir, mode, export_map,
                     timing, init_moving);
    if (eval->parsed()) return cmd_eval(est_path, gt_path, out_dir);
    if (sweep->parsed())
      return cmd_sweep(config_path, points_path, imu_path, gt_path, voxel_sizes, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
