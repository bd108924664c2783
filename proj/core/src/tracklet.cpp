#include "mvo/tracklet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvo/runtime.hpp"

namespace mvo {

const TrackletObs* Tracklet::at_frame(int frame) const {
  auto it = std::lower_bound(
      observations.begin(), observations.end(), frame,
      [](const TrackletObs& o, int f) { return o.frame < f; });
  if (it == observations.end() || it->frame != frame) return nullptr;
  return &*it;
}

bool Tracklet::observed_in(int first, int last) const {
  for (const auto& obs : observations) {
    if (obs.frame >= first && obs.frame <= last) return true;
  }
  return false;
}

void Tracklet::validate() const {
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!observations[i].point.allFinite()) {
      throw IoError("Tracklet " + std::to_string(id) +
                    ": non-finite observation");
    }
    if (i > 0 && observations[i].frame <= observations[i - 1].frame) {
      throw IoError("Tracklet " + std::to_string(id) +
                    ": frame indices not strictly increasing");
    }
  }
}

TrackletStore::TrackletStore(std::vector<Tracklet> tracklets)
    : tracklets_(std::move(tracklets)) {
  std::sort(tracklets_.begin(), tracklets_.end(),
            [](const Tracklet& a, const Tracklet& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    tracklets_[i].validate();
    if (!index_.emplace(tracklets_[i].id, i).second) {
      throw IoError("TrackletStore: duplicate tracklet id " +
                    std::to_string(tracklets_[i].id));
    }
  }
}

const Tracklet* TrackletStore::by_id(int id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &tracklets_[it->second];
}

int TrackletStore::first_frame() const {
  int f = std::numeric_limits<int>::max();
  for (const auto& t : tracklets_) f = std::min(f, t.first_frame());
  return f;
}

int TrackletStore::last_frame() const {
  int f = std::numeric_limits<int>::min();
  for (const auto& t : tracklets_) f = std::max(f, t.last_frame());
  return f;
}

TrackletStore TrackletStore::window(int first, int last) const {
  std::vector<Tracklet> out;
  for (const auto& t : tracklets_) {
    Tracklet clipped;
    clipped.id = t.id;
    for (const auto& obs : t.observations) {
      if (obs.frame >= first && obs.frame <= last) {
        clipped.observations.push_back(obs);
      }
    }
    if (!clipped.observations.empty()) out.push_back(std::move(clipped));
  }
  return TrackletStore(std::move(out));
}

std::vector<int> TrackletStore::ids_in_window(int first, int last,
                                              int min_obs) const {
  std::vector<int> ids;
  for (const auto& t : tracklets_) {
    int count = 0;
    for (const auto& obs : t.observations) {
      if (obs.frame >= first && obs.frame <= last) ++count;
    }
    if (count >= min_obs) ids.push_back(t.id);
  }
  return ids;
}

std::optional<double> edge_cost(const Tracklet& a, const Tracklet& b,
                                int min_overlap) {
  std::vector<double> distances;
  auto ia = a.observations.begin();
  auto ib = b.observations.begin();
  while (ia != a.observations.end() && ib != b.observations.end()) {
    if (ia->frame < ib->frame) {
      ++ia;
    } else if (ib->frame < ia->frame) {
      ++ib;
    } else {
      distances.push_back((ia->point - ib->point).norm());
      ++ia;
      ++ib;
    }
  }
  if (static_cast<int>(distances.size()) < min_overlap) return std::nullopt;
  double mean = 0.0;
  for (double d : distances) mean += d;
  mean /= static_cast<double>(distances.size());
  double var = 0.0;
  for (double d : distances) var += (d - mean) * (d - mean);
  var /= static_cast<double>(distances.size());
  return var;
}

RigidityGraph::RigidityGraph(std::vector<RigidityEdge> edges,
                             std::vector<int> vertices)
    : edges_(std::move(edges)), vertices_(std::move(vertices)) {
  for (int v : vertices_) adjacency_[v];
  for (const auto& e : edges_) {
    adjacency_[e.a].push_back({e.b, e.cost});
    adjacency_[e.b].push_back({e.a, e.cost});
  }
  for (auto& [v, nbrs] : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end(),
              [](const Neighbor& x, const Neighbor& y) { return x.id < y.id; });
  }
}

const std::vector<RigidityGraph::Neighbor>& RigidityGraph::neighbors(
    int id) const {
  static const std::vector<Neighbor> kEmpty;
  auto it = adjacency_.find(id);
  return it == adjacency_.end() ? kEmpty : it->second;
}

RigidityGraph build_graph(const TrackletStore& store, int k, int min_overlap) {
  if (k < 1) throw Error("build_graph: k must be >= 1");
  const auto& tracklets = store.tracklets();
  const std::size_t n = tracklets.size();

  // Candidate edges per vertex, computed independently.
  std::vector<std::vector<RigidityEdge>> selected(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<RigidityEdge> candidates;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto cost = edge_cost(tracklets[i], tracklets[j], min_overlap);
      if (!cost) continue;
      int a = std::min(tracklets[i].id, tracklets[j].id);
      int b = std::max(tracklets[i].id, tracklets[j].id);
      candidates.push_back({a, b, *cost});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const RigidityEdge& x, const RigidityEdge& y) {
                if (x.cost != y.cost) return x.cost < y.cost;
                if (x.a != y.a) return x.a < y.a;
                return x.b < y.b;
              });
    if (candidates.size() > static_cast<std::size_t>(k)) {
      candidates.resize(static_cast<std::size_t>(k));
    }
    selected[i] = std::move(candidates);
  });

  std::vector<RigidityEdge> edges;
  for (const auto& block : selected) {
    edges.insert(edges.end(), block.begin(), block.end());
  }
  std::sort(edges.begin(), edges.end(),
            [](const RigidityEdge& x, const RigidityEdge& y) {
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const RigidityEdge& x, const RigidityEdge& y) {
                            return x.a == y.a && x.b == y.b;
                          }),
              edges.end());

  std::vector<int> vertices;
  vertices.reserve(n);
  for (const auto& t : tracklets) vertices.push_back(t.id);
  return RigidityGraph(std::move(edges), std::move(vertices));
}

TrackletStore read_tracklets_csv(const std::string& path,
                                 const StereoCalib& calib,
                                 TrackletColumns columns) {
  std::ifstream in(path);
  if (!in) throw IoError("read_tracklets_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("read_tracklets_csv: empty file " + path);
  }
  std::map<int, Tracklet> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    double values[5];
    for (int i = 0; i < 5; ++i) {
      if (!std::getline(ss, field, ',')) {
        throw IoError("read_tracklets_csv: short row at line " +
                      std::to_string(line_no));
      }
      values[i] = std::stod(field);
    }
    TrackletObs obs;
    obs.frame = static_cast<int>(values[0]);
    int id = static_cast<int>(values[1]);
    if (columns == TrackletColumns::kPixel) {
      obs.pixel = StereoObs{values[2], values[3], values[4]};
      obs.point = unproject(obs.pixel, calib);
    } else {
      obs.point = Vec3(values[2], values[3], values[4]);
      obs.pixel = project(obs.point, calib);
    }
    auto& t = by_id[id];
    t.id = id;
    t.observations.push_back(obs);
  }
  std::vector<Tracklet> tracklets;
  tracklets.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    std::sort(t.observations.begin(), t.observations.end(),
              [](const TrackletObs& a, const TrackletObs& b) {
                return a.frame < b.frame;
              });
    tracklets.push_back(std::move(t));
  }
  return TrackletStore(std::move(tracklets));
}

void write_tracklets_csv(const TrackletStore& store, const std::string& path,
                         TrackletColumns columns) {
  std::ofstream out(path);
  if (!out) throw IoError("write_tracklets_csv: cannot open " + path);
  char buf[256];
  out << (columns == TrackletColumns::kPixel ? "frame,track_id,u,v,d\n"
                                             : "frame,track_id,x,y,z\n");
  // Frame-major ordering, the natural order of a streaming front end.
  std::vector<std::pair<int, const Tracklet*>> rows;
  int first = store.empty() ? 0 : store.first_frame();
  int last = store.empty() ? -1 : store.last_frame();
  for (int frame = first; frame <= last; ++frame) {
    for (const auto& t : store.tracklets()) {
      const TrackletObs* obs = t.at_frame(frame);
      if (!obs) continue;
      if (columns == TrackletColumns::kPixel) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g\n", frame,
                      t.id, obs->pixel.u, obs->pixel.v, obs->pixel.d);
      } else {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g\n", frame,
                      t.id, obs->point.x(), obs->point.y(), obs->point.z());
      }
      out << buf;
    }
  }
}

}  // namespace mvo
