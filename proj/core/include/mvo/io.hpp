#pragma once

// Run configuration, the pipeline driver, and result emission.

#include <string>
#include <vector>

#include "mvo/sliding_window.hpp"

namespace mvo {

enum class RunMode { kFullBatch, kSlidingWindow };

RunMode parse_run_mode(const std::string& name);
std::string run_mode_name(RunMode mode);

struct RunConfig {
  std::string estimator = "pose-velocity";
  std::string mode = "sliding-window";
  std::uint64_t seed = 0;
  double dt = 0.1;
  int max_occlusion_frames = 25;
  double association_overlap = 0.3;
  bool exact_left_jacobian = false;
  int threads = 0;  // 0: hardware concurrency
  EnergyConfig energy;
  PriorConfig prior;

  Flavor flavor() const { return parse_flavor(estimator); }
  RunMode run_mode() const { return parse_run_mode(mode); }
  PipelineConfig pipeline_config(int total_frames) const;
  void validate() const;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);
/// Canonical serialization used for hashing and round-trip checks.
std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

struct RunPaths {
  std::string tracklets;
  std::string calib;
  std::string out_dir;
  bool xyz_columns = false;
};

struct RunResult {
  std::vector<std::string> produced_files;
  int windows = 0;
  int tracks = 0;
};

/// Executes the pipeline on a tracklet file and writes the segmentation,
/// trajectory, track-status and manifest outputs under out_dir.
RunResult run(const RunConfig& config, const RunPaths& paths);

/// Trajectory CSV for every track:
/// `label_id,frame,t,T00..T33[,wx,wy,wz,wrx,wry,wrz[,ax,ay,az,arx,ary,arz]]`.
void write_trajectories_csv(const std::vector<MotionTrack>& tracks,
                            Flavor flavor, double dt, const std::string& path);

/// `track_id,frame,status` rows for every track.
void write_track_status_csv(const std::vector<MotionTrack>& tracks,
                            const std::string& path);

struct TrajectoryFile {
  struct Row {
    int label;
    int frame;
    double t;
    Pose pose;
  };
  std::vector<Row> rows;
};
TrajectoryFile read_trajectories_csv(const std::string& path);

/// FNV-1a hash of the canonical config serialization, hex encoded.
std::string config_hash(const RunConfig& config);

void write_manifest(const RunConfig& config, const RunPaths& paths,
                    const std::vector<std::string>& produced,
                    const std::string& path);

}  // namespace mvo
