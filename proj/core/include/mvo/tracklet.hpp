#pragma once

// Tracklet storage, windowed views, and the rigidity neighborhood graph whose
// edge weights are the variance of pairwise 3D distance over time.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvo/camera.hpp"
#include "mvo/types.hpp"

namespace mvo {

struct TrackletObs {
  int frame = 0;
  StereoObs pixel;
  Vec3 point = Vec3::Zero();  // camera-frame point [m]
};

/// Time-indexed stereo observations of one feature point. Frame indices are
/// strictly increasing; gaps are allowed.
struct Tracklet {
  int id = 0;
  std::vector<TrackletObs> observations;  // sorted by frame

  const TrackletObs* at_frame(int frame) const;
  int first_frame() const { return observations.front().frame; }
  int last_frame() const { return observations.back().frame; }
  bool observed_in(int first, int last) const;

  void validate() const;
};

class TrackletStore {
 public:
  TrackletStore() = default;
  explicit TrackletStore(std::vector<Tracklet> tracklets);

  const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  const Tracklet* by_id(int id) const;
  std::size_t size() const { return tracklets_.size(); }
  bool empty() const { return tracklets_.empty(); }

  int first_frame() const;
  int last_frame() const;

  /// Tracklets clipped to [first, last]; empties dropped, ids kept.
  TrackletStore window(int first, int last) const;

  /// Ids of tracklets with at least min_obs observations in [first, last].
  std::vector<int> ids_in_window(int first, int last, int min_obs = 1) const;

 private:
  std::vector<Tracklet> tracklets_;
  std::map<int, std::size_t> index_;
};

/// Variance of the inter-point distance over co-observed frames [m^2].
/// Empty when fewer than min_overlap frames are shared.
std::optional<double> edge_cost(const Tracklet& a, const Tracklet& b,
                                int min_overlap = 3);

struct RigidityEdge {
  int a = 0;  // tracklet ids, a < b
  int b = 0;
  double cost = 0.0;
};

class RigidityGraph {
 public:
  RigidityGraph() = default;
  RigidityGraph(std::vector<RigidityEdge> edges, std::vector<int> vertices);

  const std::vector<RigidityEdge>& edges() const { return edges_; }
  const std::vector<int>& vertices() const { return vertices_; }

  struct Neighbor {
    int id;
    double cost;
  };
  const std::vector<Neighbor>& neighbors(int id) const;

 private:
  std::vector<RigidityEdge> edges_;
  std::vector<int> vertices_;
  std::map<int, std::vector<Neighbor>> adjacency_;
};

/// k-nearest-neighbor graph over the store. Each vertex contributes its k
/// cheapest valid edges; the union is kept undirected. Ties break toward the
/// lower tracklet id.
RigidityGraph build_graph(const TrackletStore& store, int k,
                          int min_overlap = 3);

enum class TrackletColumns { kPixel, kXyz };

/// CSV with header `frame,track_id,u,v,d` (kPixel) or `frame,track_id,x,y,z`
/// (kXyz). The missing representation is derived through the calibration.
TrackletStore read_tracklets_csv(const std::string& path,
                                 const StereoCalib& calib,
                                 TrackletColumns columns);
void write_tracklets_csv(const TrackletStore& store, const std::string& path,
                         TrackletColumns columns);

}  // namespace mvo
