#pragma once

// Batch Gauss-Newton trajectory estimation over a frame window, in three
// flavors, for egomotion hypotheses and for geocentric third-party motions
// observed through a known egomotion.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mvo/camera.hpp"
#include "mvo/gp_prior.hpp"
#include "mvo/segmentation.hpp"
#include "mvo/se3.hpp"
#include "mvo/tracklet.hpp"

namespace mvo {

struct PriorConfig {
  Vec6 qc_diagonal = Vec6::Ones();  // process power spectral density
  Vec3 r_diagonal = Vec3::Ones();   // measurement covariance [px^2]
  InvJacobianMode jacobian_mode = InvJacobianMode::kFirstOrder;
  int max_iterations = 50;
  double cost_tolerance = 1e-6;   // relative cost change
  double update_tolerance = 1e-8; // step norm
  int schur_landmark_threshold = 50;

  void validate() const;
  Mat6 qc() const { return qc_diagonal.asDiagonal(); }
  Mat3 r_inverse() const { return r_diagonal.cwiseInverse().asDiagonal(); }
};

/// Estimated states over a contiguous frame range. Poses are relative to the
/// first frame of the range (which is gauge-fixed to identity). Landmarks are
/// expressed in the first frame's camera coordinates.
struct TrajectoryState {
  Flavor flavor = Flavor::kPoseOnly;
  int first_frame = 0;
  std::vector<double> timestamps;
  std::vector<Pose> poses;
  std::vector<Vec6> velocities;
  std::vector<Vec6> accelerations;
  std::map<int, Vec3> landmarks;
  bool converged = true;
  int iterations = 0;
  double final_cost = 0.0;

  int last_frame() const {
    return first_frame + static_cast<int>(poses.size()) - 1;
  }
  bool covers(int frame) const {
    return frame >= first_frame && frame <= last_frame();
  }
  GpState state_at(int frame) const;
};

/// Initial sensor-to-object transform T_{l1 C_a}: rotation identity,
/// translation from the observed support centroid.
struct GeoFrameAnchor {
  Pose object_from_camera;
  int frame = 0;
};

GeoFrameAnchor make_centroid_anchor(const TrackletStore& store,
                                    const std::set<int>& support,
                                    const MotionLabel& hypothesis);

/// Batch estimation of a label's egomotion hypothesis, initialized from its
/// RANSAC-chained trajectory. Throws EstimationError on fewer than 3
/// tracklets, fewer than 2 frames, or singular normal equations.
TrajectoryState estimate_ego_trajectory(const TrackletStore& store,
                                        const std::set<int>& support,
                                        const MotionLabel& init, Flavor flavor,
                                        const StereoCalib& calib,
                                        const PriorConfig& prior,
                                        const std::vector<double>& times);

/// Converts an egomotion hypothesis into the third-party geocentric
/// trajectory it implies (rigid body, identity deformation). Element i of
/// both inputs refers to the same frame.
std::vector<Pose> to_geocentric_pose_only(const std::vector<Pose>& hypothesis,
                                          const std::vector<Pose>& egomotion,
                                          const GeoFrameAnchor& anchor);

/// Inverse rearrangement: the egomotion hypothesis a geocentric trajectory
/// corresponds to.
Pose hypothesis_from_geocentric(const Pose& geocentric, const Pose& egomotion,
                                const GeoFrameAnchor& anchor);

/// Batch estimation of a third-party trajectory in the geocentric frame
/// fixed by an already-estimated egomotion. `egomotion[i]` is T_{C_k C_first}
/// for the same frames as the hypothesis. Pose-velocity and
/// pose-velocity-acceleration flavors only; the pose-only flavor converts
/// directly via to_geocentric_pose_only.
TrajectoryState estimate_geo_trajectory(const TrackletStore& store,
                                        const std::set<int>& support,
                                        const MotionLabel& hypothesis,
                                        const std::vector<Pose>& egomotion,
                                        const GeoFrameAnchor& anchor,
                                        Flavor flavor, const StereoCalib& calib,
                                        const PriorConfig& prior,
                                        const std::vector<double>& times);

using EgomotionHook = std::function<std::optional<int>(const Segmentation&)>;

/// Label with the largest support; ties break toward the lower id. The hook,
/// when provided and returning a value, overrides the heuristic.
int select_egomotion(const Segmentation& seg,
                     const EgomotionHook& hook = nullptr);

}  // namespace mvo
