#pragma once

// Energy-based multilabel motion segmentation: label proposal via
// frame-to-frame RANSAC, soft assignment against a residual + smoothness +
// complexity energy, greedy merging, and sanitization.

#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvo/camera.hpp"
#include "mvo/se3.hpp"
#include "mvo/tracklet.hpp"
#include "mvo/types.hpp"

namespace mvo {

/// Finite stand-in for an infinite residual inside energy sums.
inline constexpr double kResidualCap = 1e12;

struct EnergyConfig {
  double smoothness_weight = 0.5;        // assignment proportionality
  double label_cost = 1000.0;            // per-label complexity cost
  double outlier_scale = 100.0;          // outlier residual scale [px]
  double outlier_decay = 5.0;            // outlier residual decay [px]
  double inlier_threshold_px = 4.0;      // RANSAC / sanitization threshold
  int ransac_iterations = 100;
  int min_support = 20;                  // labels below this dissolve
  int min_lifetime_frames = 3;           // labels shorter than this dissolve
  int max_outer_iterations = 3;          // propose/assign/merge iterations
  int graph_neighbors = 4;
  int window_length = 8;
  double closure_threshold = 3.0;
  double closure_position_weight = 0.25;
  int min_overlap_frames = 3;

  void validate() const;
};

/// A motion hypothesis: per-frame camera-motion poses T_{C_k C_first} over a
/// contiguous frame range, plus the ids of the tracklets it explains.
struct MotionLabel {
  int id = 0;
  int first_frame = 0;
  std::vector<Pose> trajectory;  // index i is frame first_frame + i
  std::set<int> support;

  int last_frame() const {
    return first_frame + static_cast<int>(trajectory.size()) - 1;
  }
  bool covers(int frame) const {
    return frame >= first_frame && frame <= last_frame();
  }
  const Pose& at(int frame) const { return trajectory[frame - first_frame]; }
  /// T_{C_to C_from}; both frames must be covered.
  Pose relative(int to_frame, int from_frame) const;
  int lifetime() const { return static_cast<int>(trajectory.size()); }
};

struct Segmentation {
  std::vector<MotionLabel> labels;  // ascending id
  std::set<int> outliers;
  double energy = 0.0;

  const MotionLabel* label(int id) const;
  /// Label id the tracklet is assigned to, or nullopt for outliers/unknown.
  std::optional<int> label_of(int track_id) const;
  /// Throws if supports plus outliers do not partition `ids`.
  void check_partition(const std::vector<int>& ids) const;
};

/// Rigid transform mapping `from` points onto `to` points (rotation via SVD
/// with a determinant guard, translation from centroids). Empty on
/// degenerate (collinear or undersized) samples.
std::optional<Pose> wahba_svd(
    const std::vector<std::pair<Vec3, Vec3>>& from_to);

/// Stereo-pixel residual of explaining the tracklet's observation at
/// frame_to by transporting its observation at frame_from through
/// T_to_from. Returns kResidualCap when a projection fails.
double reprojection_residual(const Tracklet& tracklet, const Pose& T_to_from,
                             int frame_from, int frame_to,
                             const StereoCalib& calib);

struct RansacResult {
  Pose transform;  // T_{C_to C_from}
  std::vector<int> inliers;
};

/// Best-of-N frame-pair rigid motion over the candidate tracklets. Empty when
/// fewer than 3 candidates are observed in both frames.
std::optional<RansacResult> ransac_frame_pair(const TrackletStore& store,
                                              const std::vector<int>& candidates,
                                              int frame_from, int frame_to,
                                              const EnergyConfig& cfg,
                                              const StereoCalib& calib,
                                              std::mt19937_64& rng);

/// Max reprojection residual over the tracklet's consecutive observation
/// pairs inside the label's frame range; kResidualCap when they never
/// overlap on a pair.
double label_residual(const Tracklet& tracklet, const MotionLabel& label,
                      const StereoCalib& calib);

/// alpha * exp(-min_label_residual / beta).
double outlier_residual(double min_label_residual, const EnergyConfig& cfg);

/// Sum over graph edges of exp(-w_ij) where the two endpoints carry
/// different labels (outliers count as one shared label).
double smoothness_cost(const Segmentation& seg, const RigidityGraph& graph);

/// Total energy of the hard assignment: residual + smoothness + complexity.
double segmentation_energy(const Segmentation& seg, const RigidityGraph& graph,
                           const TrackletStore& store, const EnergyConfig& cfg,
                           const StereoCalib& calib);

/// Splits every label into the fully-disjoint components of its support
/// subgraph, rebuilds each component's trajectory by frame-to-frame RANSAC,
/// moves trajectory outliers to the outlier set, and then proposes new
/// labels from the outlier set the same way.
Segmentation propose_labels(const Segmentation& seg, const RigidityGraph& graph,
                            const TrackletStore& store, const EnergyConfig& cfg,
                            const StereoCalib& calib, std::mt19937_64& rng,
                            int& next_label_id);

/// Soft-score relaxation of the energy followed by 0.5-threshold
/// discretization; ambiguous tracklets become outliers.
Segmentation assign_labels(const Segmentation& seg, const RigidityGraph& graph,
                           const TrackletStore& store, const EnergyConfig& cfg,
                           const StereoCalib& calib);

/// Greedily applies the support relabeling with the greatest energy decrease
/// until no merge decreases the energy.
Segmentation merge_labels(const Segmentation& seg, const RigidityGraph& graph,
                          const TrackletStore& store, const EnergyConfig& cfg,
                          const StereoCalib& calib);

/// Evicts tracklets above the residual threshold and dissolves labels that
/// are too small or too short-lived.
Segmentation sanitize(const Segmentation& seg, const TrackletStore& store,
                      const EnergyConfig& cfg, const StereoCalib& calib);

/// propose -> assign -> merge until the labeling repeats (or the iteration
/// cap), then sanitize.
Segmentation segment_window(const TrackletStore& window,
                            const RigidityGraph& graph,
                            const Segmentation& prior, const EnergyConfig& cfg,
                            const StereoCalib& calib, std::mt19937_64& rng,
                            int* next_label_id = nullptr);

/// CSV `track_id,label_id` with -1 for outliers.
void write_segmentation_csv(const Segmentation& seg, const std::string& path);

}  // namespace mvo
