#include "mvo/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvo/runtime.hpp"

namespace mvo {

namespace fs = std::filesystem;

RunMode parse_run_mode(const std::string& name) {
  if (name == "full-batch" || name == "full") return RunMode::kFullBatch;
  if (name == "sliding-window" || name == "sliding") {
    return RunMode::kSlidingWindow;
  }
  throw IoError("parse_run_mode: unknown mode '" + name + "'");
}

std::string run_mode_name(RunMode mode) {
  return mode == RunMode::kFullBatch ? "full-batch" : "sliding-window";
}

void RunConfig::validate() const {
  parse_flavor(estimator);
  parse_run_mode(mode);
  if (dt <= 0) throw IoError("RunConfig: dt must be positive");
  if (max_occlusion_frames < 1) {
    throw IoError("RunConfig: max_occlusion_frames must be >= 1");
  }
  energy.validate();
  prior.validate();
}

PipelineConfig RunConfig::pipeline_config(int total_frames) const {
  PipelineConfig cfg;
  cfg.flavor = flavor();
  cfg.energy = energy;
  cfg.prior = prior;
  cfg.prior.jacobian_mode = exact_left_jacobian ? InvJacobianMode::kSeries
                                                : InvJacobianMode::kFirstOrder;
  cfg.dt = dt;
  cfg.seed = seed;
  cfg.max_occlusion_frames = max_occlusion_frames;
  cfg.association_overlap = association_overlap;
  if (run_mode() == RunMode::kFullBatch) {
    cfg.energy.window_length = std::max(total_frames, 2);
  }
  return cfg;
}

namespace {

nlohmann::ordered_json config_to_ordered_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["estimator"] = c.estimator;
  j["mode"] = c.mode;
  j["seed"] = c.seed;
  j["dt"] = c.dt;
  j["max_occlusion_frames"] = c.max_occlusion_frames;
  j["association_overlap"] = c.association_overlap;
  j["exact_left_jacobian"] = c.exact_left_jacobian;
  j["threads"] = c.threads;

  nlohmann::ordered_json e;
  e["window_length"] = c.energy.window_length;
  e["graph_neighbors"] = c.energy.graph_neighbors;
  e["ransac_iterations"] = c.energy.ransac_iterations;
  e["inlier_threshold_px"] = c.energy.inlier_threshold_px;
  e["outlier_scale"] = c.energy.outlier_scale;
  e["outlier_decay"] = c.energy.outlier_decay;
  e["smoothness_weight"] = c.energy.smoothness_weight;
  e["label_cost"] = c.energy.label_cost;
  e["min_support"] = c.energy.min_support;
  e["min_lifetime_frames"] = c.energy.min_lifetime_frames;
  e["closure_threshold"] = c.energy.closure_threshold;
  e["closure_position_weight"] = c.energy.closure_position_weight;
  e["convergence_iterations"] = c.energy.max_outer_iterations;
  e["min_overlap_frames"] = c.energy.min_overlap_frames;
  j["energy"] = e;

  nlohmann::ordered_json p;
  p["qc_diagonal"] = std::vector<double>(c.prior.qc_diagonal.data(),
                                         c.prior.qc_diagonal.data() + 6);
  p["r_diagonal"] = std::vector<double>(c.prior.r_diagonal.data(),
                                        c.prior.r_diagonal.data() + 3);
  p["max_iterations"] = c.prior.max_iterations;
  p["cost_tolerance"] = c.prior.cost_tolerance;
  p["update_tolerance"] = c.prior.update_tolerance;
  p["schur_landmark_threshold"] = c.prior.schur_landmark_threshold;
  j["prior"] = p;
  return j;
}

RunConfig config_from_ordered_json(const nlohmann::json& j) {
  RunConfig c;
  c.estimator = j.value("estimator", c.estimator);
  c.mode = j.value("mode", c.mode);
  c.seed = j.value("seed", c.seed);
  c.dt = j.value("dt", c.dt);
  c.max_occlusion_frames =
      j.value("max_occlusion_frames", c.max_occlusion_frames);
  c.association_overlap = j.value("association_overlap", c.association_overlap);
  c.exact_left_jacobian = j.value("exact_left_jacobian", c.exact_left_jacobian);
  c.threads = j.value("threads", c.threads);
  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    auto& ce = c.energy;
    ce.window_length = e.value("window_length", ce.window_length);
    ce.graph_neighbors = e.value("graph_neighbors", ce.graph_neighbors);
    ce.ransac_iterations = e.value("ransac_iterations", ce.ransac_iterations);
    ce.inlier_threshold_px =
        e.value("inlier_threshold_px", ce.inlier_threshold_px);
    ce.outlier_scale = e.value("outlier_scale", ce.outlier_scale);
    ce.outlier_decay = e.value("outlier_decay", ce.outlier_decay);
    ce.smoothness_weight = e.value("smoothness_weight", ce.smoothness_weight);
    ce.label_cost = e.value("label_cost", ce.label_cost);
    ce.min_support = e.value("min_support", ce.min_support);
    ce.min_lifetime_frames =
        e.value("min_lifetime_frames", ce.min_lifetime_frames);
    ce.closure_threshold = e.value("closure_threshold", ce.closure_threshold);
    ce.closure_position_weight =
        e.value("closure_position_weight", ce.closure_position_weight);
    ce.max_outer_iterations =
        e.value("convergence_iterations", ce.max_outer_iterations);
    ce.min_overlap_frames = e.value("min_overlap_frames", ce.min_overlap_frames);
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.contains("qc_diagonal")) {
      auto v = p.at("qc_diagonal").get<std::vector<double>>();
      if (v.size() != 6) throw IoError("RunConfig: qc_diagonal needs 6 values");
      for (int i = 0; i < 6; ++i) c.prior.qc_diagonal(i) = v[i];
    }
    if (p.contains("r_diagonal")) {
      auto v = p.at("r_diagonal").get<std::vector<double>>();
      if (v.size() != 3) throw IoError("RunConfig: r_diagonal needs 3 values");
      for (int i = 0; i < 3; ++i) c.prior.r_diagonal(i) = v[i];
    }
    c.prior.max_iterations = p.value("max_iterations", c.prior.max_iterations);
    c.prior.cost_tolerance = p.value("cost_tolerance", c.prior.cost_tolerance);
    c.prior.update_tolerance =
        p.value("update_tolerance", c.prior.update_tolerance);
    c.prior.schur_landmark_threshold =
        p.value("schur_landmark_threshold", c.prior.schur_landmark_threshold);
  }
  c.validate();
  return c;
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) {
  return config_to_ordered_json(config).dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  return config_from_ordered_json(nlohmann::json::parse(text));
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_run_config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_run_config: cannot open " + path);
  out << run_config_to_json(config);
}

std::string config_hash(const RunConfig& config) {
  std::string text = run_config_to_json(config);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

void write_trajectories_csv(const std::vector<MotionTrack>& tracks,
                            Flavor flavor, double dt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_trajectories_csv: cannot open " + path);
  out << "label_id,frame,t,T00,T01,T02,T03,T10,T11,T12,T13,T20,T21,T22,T23,"
         "T30,T31,T32,T33";
  if (flavor != Flavor::kPoseOnly) out << ",wx,wy,wz,wrx,wry,wrz";
  if (flavor == Flavor::kPoseVelocityAccel) out << ",ax,ay,az,arx,ary,arz";
  out << "\n";

  char buf[1024];
  for (const auto& track : tracks) {
    for (int f = track.first_frame(); f <= track.last_frame(); ++f) {
      GpState s = track.state_at(f);
      const Mat4& m = s.pose.matrix();
      int n = std::snprintf(
          buf, sizeof(buf),
          "%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
          "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
          track.id, f, f * dt, m(0, 0), m(0, 1), m(0, 2), m(0, 3), m(1, 0),
          m(1, 1), m(1, 2), m(1, 3), m(2, 0), m(2, 1), m(2, 2), m(2, 3),
          m(3, 0), m(3, 1), m(3, 2), m(3, 3));
      if (flavor != Flavor::kPoseOnly) {
        n += std::snprintf(buf + n, sizeof(buf) - n,
                           ",%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                           s.velocity(0), s.velocity(1), s.velocity(2),
                           s.velocity(3), s.velocity(4), s.velocity(5));
      }
      if (flavor == Flavor::kPoseVelocityAccel) {
        n += std::snprintf(buf + n, sizeof(buf) - n,
                           ",%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                           s.acceleration(0), s.acceleration(1),
                           s.acceleration(2), s.acceleration(3),
                           s.acceleration(4), s.acceleration(5));
      }
      out << buf << "\n";
    }
  }
}

void write_track_status_csv(const std::vector<MotionTrack>& tracks,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_track_status_csv: cannot open " + path);
  out << "track_id,frame,status\n";
  for (const auto& track : tracks) {
    for (int f = track.first_frame(); f <= track.last_frame(); ++f) {
      out << track.id << "," << f << ","
          << track_status_name(track.status[f - track.first_frame()]) << "\n";
    }
  }
}

TrajectoryFile read_trajectories_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_trajectories_csv: cannot open " + path);
  TrajectoryFile file;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) values.push_back(std::stod(field));
    if (values.size() < 19) {
      throw IoError("read_trajectories_csv: malformed row");
    }
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = values[3 + 4 * r + c];
    }
    file.rows.push_back({static_cast<int>(values[0]),
                         static_cast<int>(values[1]), values[2], Pose(m)});
  }
  return file;
}

void write_manifest(const RunConfig& config, const RunPaths& paths,
                    const std::vector<std::string>& produced,
                    const std::string& path) {
  nlohmann::ordered_json j;
  j["inputs"] = {{"tracklets", paths.tracklets}, {"calib", paths.calib}};
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["config"] = nlohmann::ordered_json::parse(run_config_to_json(config));
  j["produced"] = produced;
  std::ofstream out(path);
  if (!out) throw IoError("write_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

RunResult run(const RunConfig& config, const RunPaths& paths) {
  config.validate();
  set_max_threads(config.threads);

  StereoCalib calib = load_calib(paths.calib);
  TrackletStore stream = read_tracklets_csv(
      paths.tracklets, calib,
      paths.xyz_columns ? TrackletColumns::kXyz : TrackletColumns::kPixel);
  if (stream.empty()) throw IoError("run: no tracklets in input");

  int total_frames = stream.last_frame() - stream.first_frame() + 1;
  Pipeline pipeline(config.pipeline_config(total_frames), calib);
  pipeline.run(stream);

  fs::create_directories(paths.out_dir);
  fs::create_directories(paths.out_dir + "/windows");

  RunResult result;
  auto emit = [&](const std::string& relative) {
    result.produced_files.push_back(relative);
    return paths.out_dir + "/" + relative;
  };

  // Per-window incremental outputs.
  std::vector<MotionTrack> all_tracks = pipeline.tracks();
  for (const auto& w : pipeline.windows()) {
    char name[64];
    std::snprintf(name, sizeof(name), "windows/segmentation_%05d.csv",
                  w.window_last);
    write_segmentation_csv(w.segmentation, emit(name));

    std::snprintf(name, sizeof(name), "windows/trajectories_%05d.csv",
                  w.window_last);
    std::vector<MotionTrack> window_tracks;
    for (const auto& t : all_tracks) {
      if (!t.covers(w.window_first)) continue;
      MotionTrack clipped = t;
      int lo = std::max(w.window_first, t.first_frame());
      int hi = std::min(w.window_last, t.last_frame());
      if (hi < lo) continue;
      clipped.anchor_frame = lo;
      clipped.poses.assign(t.poses.begin() + (lo - t.first_frame()),
                           t.poses.begin() + (hi - t.first_frame()) + 1);
      auto slice = [&](const std::vector<Vec6>& v) {
        return v.empty() ? std::vector<Vec6>()
                         : std::vector<Vec6>(
                               v.begin() + (lo - t.first_frame()),
                               v.begin() + (hi - t.first_frame()) + 1);
      };
      clipped.velocities = slice(t.velocities);
      clipped.accelerations = slice(t.accelerations);
      clipped.status.assign(t.status.begin() + (lo - t.first_frame()),
                            t.status.begin() + (hi - t.first_frame()) + 1);
      window_tracks.push_back(std::move(clipped));
    }
    write_trajectories_csv(window_tracks, config.flavor(), config.dt,
                           emit(name));
  }

  // Full-history outputs.
  write_segmentation_csv(pipeline.windows().empty()
                             ? Segmentation{}
                             : pipeline.windows().back().segmentation,
                         emit("segmentation.csv"));
  write_trajectories_csv(all_tracks, config.flavor(), config.dt,
                         emit("trajectories.csv"));
  write_track_status_csv(all_tracks, emit("track_status.csv"));
  save_run_config(config, emit("config.json"));
  write_manifest(config, paths, result.produced_files,
                 paths.out_dir + "/manifest.json");
  result.produced_files.push_back("manifest.json");

  result.windows = static_cast<int>(pipeline.windows().size());
  result.tracks = static_cast<int>(pipeline.tracks().size());
  return result;
}

}  // namespace mvo
