#pragma once

// Trajectory calibration against ground truth and the error metrics derived
// from the calibrated error transform.

#include <string>
#include <vector>

#include "mvo/se3.hpp"
#include "mvo/types.hpp"

namespace mvo {

/// Estimated and ground-truth trajectories over the same frames, both
/// relative to their own first frame, with the transforms needed to align
/// the two frame families at the start.
struct TrajectoryPair {
  std::vector<Pose> estimate;           // T_{l_j l_1}
  std::vector<Pose> truth;              // T_{l^GT_j l^GT_1}
  Pose truth_from_apparatus;            // T_{l^GT_1 A^GT_1}
  Pose apparatus_from_camera;           // T_{A^GT C}
  Pose estimate_anchor;                 // T_{l_1 C_1}
};

/// T_{B_j B_1} sequence from world poses T_{W B_j}.
std::vector<Pose> relative_from_world(const std::vector<Pose>& world);

/// Per-frame calibration transforms T_{l^GT_j l_j}, from the initial
/// calibration propagated forward.
std::vector<Pose> calibrate(const TrajectoryPair& pair);

/// Calibrated error transform between the motion from frame j to frame k of
/// the estimate and of the truth. Identity for a perfect estimate.
Pose pose_error(const TrajectoryPair& pair, const std::vector<Pose>& calib,
                int j, int k);

/// Intrinsic z-y-x Euler decomposition (yaw about z, then pitch, then roll),
/// radians.
Vec3 rotation_to_rpy(const Mat3& rotation);

/// Shifts each angle sequence by multiples of 2 pi toward the previous
/// sample, so cumulative rotations are not bounded to +-180 degrees.
void unwrap_rpy_in_place(std::vector<Vec3>& rpy);

struct GlobalErrorRow {
  Vec3 xyz = Vec3::Zero();      // [m]
  Vec3 rpy_deg = Vec3::Zero();  // unwrapped [deg]
};

/// Error at every frame relative to the trajectory start.
std::vector<GlobalErrorRow> global_error(const TrajectoryPair& pair);

struct GlobalErrorSummary {
  double max_xyz = 0.0;   // max over frames of the translational error norm
  Vec3 max_rpy_deg = Vec3::Zero();  // per-axis signed value of max magnitude
};
GlobalErrorSummary summarize_global_error(
    const std::vector<GlobalErrorRow>& rows);

struct Rmsre {
  double xyz = 0.0;        // [m]
  double angle_deg = 0.0;  // [deg]
};

/// Root-mean-square relative (frame-to-frame) error of the calibrated error
/// transforms.
Rmsre rmsre(const TrajectoryPair& pair);

struct PathStats {
  double total_translation = 0.0;          // [m]
  Vec3 total_rpy_deg = Vec3::Zero();       // per-axis accumulated [deg]
  double max_displacement = 0.0;           // [m] from the first frame
  Vec3 max_rpy_deg = Vec3::Zero();         // per-axis signed max magnitude
};

PathStats path_stats(const std::vector<Pose>& relative_trajectory);

struct ErrorReportRow {
  int label = 0;
  GlobalErrorSummary global;
  Rmsre relative;
  PathStats truth_path;
};

void write_error_report_csv(const std::vector<ErrorReportRow>& rows,
                            const std::string& path);

/// Plot data: `frame,label,ex,ey,ez,eroll,epitch,eyaw` per frame.
void write_plot_csv(const std::vector<std::pair<int, std::vector<GlobalErrorRow>>>&
                        per_label_rows,
                    int first_frame, const std::string& path);

}  // namespace mvo
