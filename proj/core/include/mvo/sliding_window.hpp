#pragma once

// Online operation over fixed-length windows: label consistency across
// windows, extrapolation and interpolation of unobserved states, and motion
// closure after temporary occlusions.

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "mvo/estimator.hpp"
#include "mvo/gp_prior.hpp"
#include "mvo/segmentation.hpp"

namespace mvo {

enum class TrackStatus { kDirect, kExtrapolated, kInterpolated, kClosed };
const char* track_status_name(TrackStatus status);

/// A persistently tracked motion: full-history geocentric trajectory
/// T_{l_k l_1} anchored at the frame the track was first estimated.
struct MotionTrack {
  int id = 0;
  Flavor flavor = Flavor::kPoseVelocity;
  int anchor_frame = 0;
  GeoFrameAnchor anchor;  // T_{l_1 C_anchor}
  bool is_ego = false;

  std::vector<Pose> poses;  // index i is frame anchor_frame + i
  std::vector<Vec6> velocities;
  std::vector<Vec6> accelerations;
  std::vector<TrackStatus> status;

  int last_direct_frame = 0;
  bool retired = false;

  int first_frame() const { return anchor_frame; }
  int last_frame() const {
    return anchor_frame + static_cast<int>(poses.size()) - 1;
  }
  bool covers(int frame) const {
    return frame >= first_frame() && frame <= last_frame();
  }
  GpState state_at(int frame) const;
  void set_state(int frame, const GpState& state, TrackStatus status);

  /// T_{l_f C_f} given the camera trajectory relative to the track anchor
  /// frame (T_{C_f C_anchor}).
  Pose object_from_camera(int frame, const Pose& cam_from_anchor) const;

  /// Throws when the status sequence violates its invariants.
  void check_status() const;
};

/// Associates current labels with previous labels by support overlap.
/// Mapping is injective, built greedily by descending overlap; labels whose
/// best overlap is below `min_fraction` of their support stay unmapped.
std::map<int, int> associate_labels(const Segmentation& current,
                                    const Segmentation& previous,
                                    double min_fraction = 0.3);

struct PipelineConfig {
  Flavor flavor = Flavor::kPoseVelocity;
  EnergyConfig energy;
  PriorConfig prior;
  double dt = 0.1;
  std::uint64_t seed = 0;
  int max_occlusion_frames = 25;
  double association_overlap = 0.3;
};

/// Extrapolates the track from its last direct (or closed) state to `frame`.
/// Pose-only tracks use the discrete velocity of the final two poses.
GpState extrapolate_track(const MotionTrack& track, int frame,
                          const PipelineConfig& cfg);

/// Interpolates between two bracketing states of the track. Boundary frames
/// return the stored states bit-exactly.
GpState interpolate_track(const MotionTrack& track, int frame_j, int frame_k,
                          int frame, const PipelineConfig& cfg);

/// A newly discovered motion, summarized at the first frame it is fully
/// estimated.
struct ClosureQuery {
  int frame = 0;
  Vec3 centroid_camera = Vec3::Zero();  // support centroid in C_frame [m]
  Vec6 velocity = Vec6::Zero();         // estimated body-centric velocity
  Pose object_from_camera;              // T_{l'_frame C_frame}
};

/// An occluded track extrapolated to the query frame.
struct ClosureCandidate {
  int track_id = 0;
  Vec3 centroid_camera = Vec3::Zero();
  Vec6 velocity = Vec6::Zero();
  Pose object_from_camera;  // T_{l_check C_frame}
};

/// Weighted position/velocity proximity decision; the velocity term is
/// omitted for the pose-only flavor. Returns the best candidate's track id,
/// or nullopt when none passes the threshold.
std::optional<int> try_motion_closure(
    const ClosureQuery& query, const std::vector<ClosureCandidate>& candidates,
    Flavor flavor, const EnergyConfig& cfg);

/// Correction transform T_{l_k lcheck_k}: identity rotation, translation
/// moving the extrapolated pose onto the newly observed centroid.
Pose closure_correction(const ClosureCandidate& chosen,
                        const ClosureQuery& query);

struct WindowOutput {
  int window_first = 0;
  int window_last = 0;
  Segmentation segmentation;            // labels renumbered to track ids
  std::vector<int> direct_track_ids;    // tracks updated from measurements
};

/// Sliding-window driver. Feed frames in order through observe(); each call
/// that completes a window runs segmentation, estimation, association,
/// extrapolation, and motion closure.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, StereoCalib calib);

  /// Processes the stream up to `last_frame` (inclusive), emitting one
  /// window per frame once the first window is full. In full-batch mode use
  /// window_length >= stream length.
  void run(const TrackletStore& stream);

  const std::vector<MotionTrack>& tracks() const { return tracks_; }
  const std::vector<WindowOutput>& windows() const { return windows_; }
  const MotionTrack* ego_track() const;
  const MotionTrack* track(int id) const;

 private:
  void process_window(const TrackletStore& stream, int first, int last);
  Segmentation seed_labels(int first, int last,
                           const TrackletStore& window) const;
  std::vector<double> times_for(const MotionLabel& label) const;
  Pose camera_pose(int frame) const;  // T_{C_frame C_0}, extrapolating ego
  void update_track_from_estimate(MotionTrack& track,
                                  const TrajectoryState& estimate,
                                  int gauge_frame);
  void extrapolate_missing(MotionTrack& track, int frame);

  PipelineConfig cfg_;
  StereoCalib calib_;
  std::mt19937_64 rng_;
  int next_label_id_ = 0;
  int next_track_id_ = 0;
  std::vector<MotionTrack> tracks_;
  std::map<int, int> label_to_track_;  // previous window
  Segmentation previous_seg_;
  bool has_previous_ = false;
  int ego_track_id_ = -1;
  std::vector<WindowOutput> windows_;
};

}  // namespace mvo
