#pragma once

// Synthetic rigid-body scene generation with ground truth, plus the
// segmentation scoring oracle. Desk-scale stand-in for recorded datasets.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvo/camera.hpp"
#include "mvo/segmentation.hpp"
#include "mvo/se3.hpp"
#include "mvo/tracklet.hpp"

namespace mvo {

enum class ProgramKind {
  kConstantPose,
  kConstantVelocity,
  kConstantAcceleration,
  kPendular,
};

/// World-frame pose program T_WB(t).
///   constant-velocity:      T0 * exp(t w)
///   constant-acceleration:  T0 * exp(t w + t^2/2 dw); prior-exact when w and
///                           dw share a screw axis
///   pendular:               Hinge(theta(t)) * T0 with theta = A sin(2 pi t /
///                           period + phase) about `axis` through `hinge`
struct TrajectoryProgram {
  ProgramKind kind = ProgramKind::kConstantPose;
  Pose initial;
  Vec6 velocity = Vec6::Zero();
  Vec6 acceleration = Vec6::Zero();
  Vec3 axis = Vec3::UnitX();
  Vec3 hinge = Vec3::Zero();
  double amplitude = 0.0;  // [rad]
  double period = 1.0;     // [s]
  double phase = 0.0;      // [rad]

  Pose pose_at(double t) const;
};

struct SceneBody {
  std::vector<Vec3> points;  // body-frame [m]; generated from the box below
                             // when empty
  int point_count = 0;
  Vec3 box_center = Vec3::Zero();
  Vec3 box_half_extent = Vec3::Constant(0.25);
  TrajectoryProgram program;
  std::vector<std::pair<int, int>> occlusions;  // inclusive frame ranges
};

struct SceneScript {
  std::vector<SceneBody> bodies;
  TrajectoryProgram camera;
  StereoCalib calib;
  double noise_sigma = 0.0;  // [px], applied to u, v and d
  int frame_count = 2;
  double dt = 0.1;  // [s]
  std::uint64_t seed = 0;
  // Optional frustum (u_min, u_max, v_min, v_max); observations outside are
  // dropped.
  std::optional<std::array<double, 4>> frustum;

  void validate() const;
};

struct SceneTruth {
  std::vector<std::vector<Pose>> body_poses;  // [body][frame] T_WB
  std::vector<Pose> camera_poses;             // [frame] T_WC
  std::map<int, int> track_to_body;
  std::vector<double> timestamps;
  // visible[body][frame]: at least one point of the body was observed
  std::vector<std::vector<bool>> visible;
};

struct GeneratedScene {
  TrackletStore tracklets;
  SceneTruth truth;
};

/// Deterministic under the script seed.
GeneratedScene generate(const SceneScript& script);

/// Fraction of tracklets assigned correctly under the best injective mapping
/// between labels and bodies (exhaustive; intended for <= 8 labels).
/// Outlier-assigned tracklets count as incorrect.
double oracle_segmentation_score(const Segmentation& seg,
                                 const SceneTruth& truth);

SceneScript load_scene_script(const std::string& path);
void save_scene_script(const SceneScript& script, const std::string& path);

/// `body_id,frame,T00..T33` with body_id -1 for the camera, and
/// `track_id,body_id`.
void write_truth_bodies_csv(const SceneTruth& truth, const std::string& path);
void write_truth_tracks_csv(const SceneTruth& truth, const std::string& path);

struct TruthFile {
  std::map<int, std::vector<Pose>> world_poses;  // body id -> per-frame T_WB
  std::map<int, int> track_to_body;
  int first_frame = 0;
};
TruthFile read_truth_csv(const std::string& bodies_path,
                         const std::string& tracks_path);

}  // namespace mvo
